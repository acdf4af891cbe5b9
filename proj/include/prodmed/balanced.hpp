#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "prodmed/calibration.hpp"
#include "prodmed/median_solver.hpp"

namespace prodmed {

/// Empirical balance function alpha -> H_n(alpha, m) at a fixed location, built from the
/// cached squared factor distances. With dimensions, A and B are divided by d_M and d_N.
class BalanceFunction {
 public:
  BalanceFunction(std::vector<FactorSquares> squares,
                  std::optional<FactorDimensions> dims = std::nullopt);
  [[nodiscard]] static BalanceFunction at(const ProductPoint& m, const ProductSample& sample,
                                          std::optional<FactorDimensions> dims = std::nullopt);

  /// Mean of h over observations with a denominator above 1e-12.
  /// Throws NumericalError when every observation is degenerate.
  [[nodiscard]] double operator()(double alpha) const;
  [[nodiscard]] std::size_t degenerate(double alpha) const;
  /// Per-observation h (0 for degenerate observations).
  [[nodiscard]] std::vector<double> terms(double alpha) const;
  /// True when some observation has A > 0 and B > 0, so H is strictly increasing.
  [[nodiscard]] bool strictly_monotone() const;
  [[nodiscard]] const std::vector<FactorSquares>& squares() const noexcept { return squares_; }

 private:
  std::vector<FactorSquares> squares_;
};

[[nodiscard]] double balance_mean(ScaleValue alpha, const ProductPoint& m,
                                  const ProductSample& sample,
                                  std::optional<FactorDimensions> dims = std::nullopt);

enum class BracketStatus { root, boundary_low, boundary_high, non_unique };

[[nodiscard]] std::string to_string(BracketStatus status);

struct BisectionResult {
  ScaleValue alpha{1.0};
  BracketStatus status = BracketStatus::root;
  double residual = 0.0;
  int iterations = 0;
};

/// Root of the balance function on [epsilon, 2 - epsilon] by bisection. Without a sign
/// change the endpoint with the smaller |H| is returned and flagged; an identically zero
/// H gives alpha = 1 flagged non_unique.
[[nodiscard]] BisectionResult bisect_alpha(const BalanceFunction& h, double epsilon = kDefaultEpsilon,
                                           double tol_alpha = 1e-6);
[[nodiscard]] BisectionResult bisect_alpha(const ProductPoint& m, const ProductSample& sample,
                                           double epsilon = kDefaultEpsilon, double tol_alpha = 1e-6,
                                           std::optional<FactorDimensions> dims = std::nullopt);

struct BalancedConfig {
  SolverConfig solver{500, 1e-10, 0.5, kCoincidenceGuard};
  double epsilon = kDefaultEpsilon;
  double alpha_tolerance = 1e-12;
  double location_tolerance = 1e-8;
  double alpha_step_tolerance = 1e-7;
  int max_outer_iterations = 100;
  bool dimension_adjusted = false;
  std::optional<ProductPoint> init;
  double initial_alpha = 1.0;
  /// Every third outer step replaces the bisection update by an Aitken extrapolation of the
  /// two preceding updates when the result stays inside [epsilon, 2 - epsilon].
  bool accelerate = true;
  bool compute_sandwich = true;
};

struct BalancedFit {
  ProductPoint location;
  ScaleValue alpha_bal;
  double H_residual = 0.0;
  /// {|G_n|^2 + H_n^2}^{1/2} at the solution, G_n measured in the alpha = 1 metric.
  double estimating_residual = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  bool damped = false;
  BracketStatus bracket = BracketStatus::root;
  bool dimension_adjusted = false;
  std::vector<double> alpha_trace;
  Eigen::MatrixXd J_hat;
  Eigen::MatrixXd Xi_cov;
  double alpha_se = 0.0;
  double wald_lo = 0.0;
  double wald_hi = 0.0;
  bool sandwich_available = false;
};

/// Alternates fixed-alpha Weiszfeld fits with bisection on the balance equation.
[[nodiscard]] BalancedFit solve_balanced(const ProductSample& sample, const BalancedConfig& cfg = {});

struct BalancedSandwich {
  Eigen::MatrixXd J_hat;
  Eigen::MatrixXd Xi_cov;
  /// Stacked (psi, h) per observation in chart coordinates (n x (dim + 1)).
  Eigen::MatrixXd Xi;
  double alpha_se = 0.0;
  double wald_lo = 0.0;
  double wald_hi = 0.0;
  bool singular = false;
};

/// Central-difference Jacobian of (chart coordinates, alpha) -> P_n Xi and the sandwich
/// standard error sqrt([J^{-1} Xi_cov J^{-T}]_{alpha alpha} / n) with a 95% Wald interval.
[[nodiscard]] BalancedSandwich balanced_sandwich(const ProductPoint& m_hat, ScaleValue alpha_hat,
                                                 const ProductSample& sample,
                                                 bool dimension_adjusted = false);
[[nodiscard]] BalancedSandwich balanced_sandwich(const BalancedFit& fit, const ProductSample& sample);

}  // namespace prodmed
