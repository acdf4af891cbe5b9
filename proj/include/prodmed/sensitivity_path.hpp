#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prodmed/median_solver.hpp"

namespace prodmed {

enum class PathMethod { implicit_formula, finite_difference };

[[nodiscard]] std::string to_string(PathMethod method);

/// `steps` equispaced values from lo to hi inclusive.
[[nodiscard]] std::vector<double> make_grid(double lo, double hi, int steps);

struct PathDerivative {
  /// Derivative of the median path in the alpha-orthonormal chart at the median.
  Eigen::VectorXd coordinates;
  ProductTangent velocity;
  /// Mean alpha-derivative of the score, in the same chart (empty for finite differences).
  Eigen::VectorXd B_hat;
  double S = 0.0;
  double S_M = 0.0;
  double S_N = 0.0;
};

/// Implicit-function derivative -A^{-1} B at a fitted median. Reuses `A` when given.
/// Throws NumericalError when A is singular.
[[nodiscard]] PathDerivative path_derivative(ScaleValue alpha, const ProductPoint& m_hat,
                                             const ProductSample& sample,
                                             const std::optional<JacobianEstimate>& A = std::nullopt);

/// Central difference (log at m_hat of the fits at alpha +- h) / (2h), warm-started from
/// m_hat.
[[nodiscard]] PathDerivative finite_difference_derivative(ScaleValue alpha,
                                                          const ProductPoint& m_hat,
                                                          const ProductSample& sample,
                                                          double h = 0.02,
                                                          const SolverConfig& cfg = {});

struct PathConfig {
  SolverConfig solver;
  PathMethod method = PathMethod::implicit_formula;
  double fd_step = 0.02;
  bool compute_sensitivity = true;
  /// Solve from the right end of the grid to the left.
  bool reverse = false;
  std::optional<ProductPoint> init;
};

struct PathResult {
  std::vector<ScaleValue> grid;
  std::vector<MedianFit> fits;
  std::vector<double> profiled;
  std::optional<MedianFit> reference;  // the alpha = 1 fit
  std::vector<double> displacement_m;
  std::vector<double> displacement_n;
  /// NaN at the grid endpoints or when not computed.
  std::vector<double> sensitivity;
  std::vector<double> sensitivity_m;
  std::vector<double> sensitivity_n;
  PathMethod method = PathMethod::implicit_formula;
  std::size_t unconverged = 0;

  /// Index of the smallest profiled objective (lowest index on ties).
  [[nodiscard]] std::size_t argmin() const;
};

/// Warm-started fits along `grid`, which must be strictly increasing inside
/// [epsilon, 2 - epsilon]. Unconverged fits are counted, not fatal.
[[nodiscard]] PathResult solve_path(const ProductSample& sample, std::span<const double> grid,
                                    double epsilon = kDefaultEpsilon, const PathConfig& cfg = {});

enum class BandMethod { percentile, symmetric };

struct PathBands {
  std::vector<double> alpha;
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
  int replications = 0;
  std::uint64_t seed = 0;
  /// Per grid point, replicate fits dropped for non-convergence.
  std::vector<int> dropped;
  /// More than 10% of the replicates dropped at some grid point.
  bool unreliable = false;
};

struct BandConfig {
  PathConfig path;
  int replications = 200;
  std::uint64_t seed = 1;
  double level = 0.95;
  BandMethod method = BandMethod::percentile;
  unsigned threads = 1;
};

using PathSummary = std::function<double(const ProductPoint&)>;

/// Case-resampling bootstrap bands for a scalar summary along the path. Requires at
/// least 50 replications; deterministic given the seed for any thread count.
[[nodiscard]] PathBands bootstrap_bands(const ProductSample& sample, std::span<const double> grid,
                                        const PathSummary& summary, const BandConfig& cfg,
                                        double epsilon = kDefaultEpsilon);

/// CSV with columns alpha, objective, displacement_M, displacement_N, S, S_M, S_N,
/// converged, and band columns when given.
[[nodiscard]] std::string path_csv(const PathResult& path, const PathBands* bands = nullptr);

}  // namespace prodmed
