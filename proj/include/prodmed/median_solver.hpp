#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prodmed/scaled_metric.hpp"

namespace prodmed {

struct SolverConfig {
  int max_iterations = 500;
  /// Bound on the Weiszfeld step, measured as {|u|^2 + |v|^2}^{1/2} in the factors'
  /// own metrics (unit multipliers excluded, so the stopping rule is unit invariant).
  double tolerance = 1e-9;
  /// Backtracking factor applied when a step leaves the SPD cone or raises the objective.
  double shrink = 0.5;
  double coincidence_guard = kCoincidenceGuard;

  /// Throws InputError on invalid settings.
  void validate() const;
};

struct MedianFit {
  ProductPoint location;
  ScaleValue alpha;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_step_norm = 0.0;
  /// |G_n(location)| in the alpha = 1 metric, unit scales included.
  double gradient_norm = 0.0;
  /// Mean of 1 / r_i at the location over non-coincident observations.
  double mean_inverse_distance = 0.0;
  /// Objective at the initial point followed by every accepted iterate.
  std::vector<double> objective_trace;
};

/// Starting point used for init = auto: coordinatewise median for Euclidean factors,
/// the data point minimizing the marginal objective (lowest index on ties) for BW factors.
[[nodiscard]] ProductPoint auto_initial_point(const ProductSample& sample);

/// Product Weiszfeld iteration for the alpha-scaled median. Factor weights cancel in
/// the factorwise update, p <- exp_p(sum log_p(X_i)/r_i / sum 1/r_i) and likewise for q.
/// Iterates that coincide with observations use the Vardi-Zhang modification.
[[nodiscard]] MedianFit product_weiszfeld(ScaleValue alpha, const ProductSample& sample,
                                          const std::optional<ProductPoint>& init = std::nullopt,
                                          const SolverConfig& cfg = {});

struct MarginalFit {
  FactorPoint location;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

/// Riemannian Weiszfeld geometric median of one factor's observations.
[[nodiscard]] MarginalFit marginal_median(std::span<const FactorPoint> points,
                                          const SolverConfig& cfg = {});

/// Mean score G_n(at) expressed in the chart's coordinates. Tangents at `at` are carried
/// to the chart base by the ambient (vector/matrix) identification.
[[nodiscard]] Eigen::VectorXd mean_score_coordinates(const ProductChart& chart,
                                                     const ProductSample& sample,
                                                     const ProductPoint& at, ScaleValue alpha);

struct JacobianEstimate {
  Eigen::MatrixXd matrix;
  double step = 0.0;
  double condition_number = 0.0;
  bool ill_conditioned = false;
};

/// Default central-difference step 1e-4 (1 + |m|), |m| the Frobenius size of the location.
[[nodiscard]] double default_difference_step(const ProductPoint& m);

/// Central-difference Jacobian of m -> G_n(m) in the alpha-orthonormal chart at m_hat,
/// symmetrized. Since G_n is minus the gradient of the objective, the result is
/// negative definite at a strict minimum. Throws NumericalError if the step underflows.
[[nodiscard]] JacobianEstimate estimate_A_alpha(ScaleValue alpha, const ProductPoint& m_hat,
                                                const ProductSample& sample,
                                                std::optional<double> step = std::nullopt);

struct SandwichPieces {
  Eigen::MatrixXd A_hat;
  Eigen::MatrixXd Sigma_hat;
  Eigen::MatrixXd V_hat;
  /// Per-observation scores in chart coordinates (n x dim); coincident rows are zero.
  Eigen::MatrixXd scores;
  std::string frame;
  bool ill_conditioned = false;
};

/// Sigma_hat uses divisor n. Throws NumericalError when A_hat is singular.
[[nodiscard]] SandwichPieces estimate_sigma_and_sandwich(ScaleValue alpha,
                                                         const ProductPoint& m_hat,
                                                         const ProductSample& sample);

/// Per-observation score coordinates in `chart` (n x dim).
[[nodiscard]] Eigen::MatrixXd score_coordinates(const ProductChart& chart,
                                                const ProductSample& sample, ScaleValue alpha);

/// Covariance with divisor n of the rows of `x`.
[[nodiscard]] Eigen::MatrixXd covariance_rows(const Eigen::MatrixXd& x);

}  // namespace prodmed
