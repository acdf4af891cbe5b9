#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "prodmed/median_solver.hpp"

namespace prodmed {

enum class ScaleMethod { radial_median, rms };

[[nodiscard]] std::string to_string(ScaleMethod method);

struct RadialScales {
  FactorPoint p_hat;
  FactorPoint q_hat;
  double s_m = 0.0;
  double s_n = 0.0;
  /// Distances of the observations to the marginal medians, unit scales applied.
  std::vector<double> radial_m;
  std::vector<double> radial_n;
  bool marginals_converged = false;
  /// A scale is zero: at least half of a factor's data sit at its marginal median.
  bool degenerate = false;
};

/// Marginal medians and radial scales: the lower median (order statistic ceil(n/2)) of
/// the radial distances, or their root mean square for ScaleMethod::rms.
[[nodiscard]] RadialScales radial_scales(const ProductSample& sample,
                                         ScaleMethod method = ScaleMethod::radial_median,
                                         const SolverConfig& cfg = {});

struct FactorDimensions {
  int m = 1;
  int n = 1;
};

struct CalibratedAlpha {
  double raw = 1.0;
  ScaleValue alpha{1.0};
  bool truncation_binds = false;
};

/// 2 s_N^2 / (s_M^2 + s_N^2), or with dimensions 2 d_M s_N^2 / (d_M s_N^2 + d_N s_M^2),
/// clamped to [epsilon, 2 - epsilon]. Throws NumericalError when both scales are zero.
[[nodiscard]] CalibratedAlpha calibrated_alpha(double s_m, double s_n,
                                               std::optional<FactorDimensions> dims = std::nullopt,
                                               double epsilon = kDefaultEpsilon);

/// Partial derivatives of the calibration map with respect to (s_M, s_N).
[[nodiscard]] std::pair<double, double> calibration_gradient(
    double s_m, double s_n, std::optional<FactorDimensions> dims = std::nullopt);

struct CalibrationConfig {
  SolverConfig solver;
  double epsilon = kDefaultEpsilon;
  bool dimension_adjusted = false;
  /// When false the median is fitted at the raw calibrated weight.
  bool truncate = true;
  ScaleMethod scale_method = ScaleMethod::radial_median;
  /// Starting point for the calibrated fit; defaults to the pair of marginal medians.
  std::optional<ProductPoint> init;
};

struct CalibrationResult {
  FactorPoint marginal_median_m;
  FactorPoint marginal_median_n;
  double s_m = 0.0;
  double s_n = 0.0;
  ScaleValue alpha_sc;
  double alpha_raw = 1.0;
  bool dimension_adjusted = false;
  bool truncation_binds = false;
  bool truncated = true;
  ScaleMethod scale_method = ScaleMethod::radial_median;
  MedianFit fit;
  std::vector<double> radial_m;
  std::vector<double> radial_n;
  std::optional<Eigen::MatrixXd> V_sc;
};

/// Radial scales, calibrated weight, then the product median at that weight.
/// Throws NumericalError when a scale is zero and the weight cannot be formed or used.
[[nodiscard]] CalibrationResult calibrate(const ProductSample& sample,
                                          const CalibrationConfig& cfg = {});

struct RescaleReport {
  double c_m = 1.0;
  double c_n = 1.0;
  double alpha_reference = 1.0;
  double alpha_rescaled = 1.0;
  /// {d_M^2 + d_N^2}^{1/2} between the two calibrated medians, in original units.
  double drift = 0.0;
  double ratio_reference = 0.0;
  /// alpha' c_M^2 / ((2 - alpha') c_N^2)
  double ratio_rescaled = 0.0;
  bool truncation_binds = false;
};

[[nodiscard]] RescaleReport unit_rescale_check(const ProductSample& sample, double c_m,
                                               double c_n, const CalibrationConfig& cfg = {});

struct InfluencePieces {
  double f_m = 0.0;
  double f_n = 0.0;
  double bandwidth_m = 0.0;
  double bandwidth_n = 0.0;
  double dalpha_dsm = 0.0;
  double dalpha_dsn = 0.0;
  std::vector<double> phi_sm;
  std::vector<double> phi_sn;
  /// Recentred to sample mean zero; identically zero when truncation binds.
  std::vector<double> phi_alpha;
};

struct CalibratedSandwich {
  InfluencePieces influence;
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  /// First-order radial plug-in: the marginal-median shift term of the scale influence
  /// function is omitted.
  Eigen::MatrixXd V_sc;
  /// A kernel density estimate fell below 1e-6; prefer the bootstrap.
  bool unreliable = false;
};

[[nodiscard]] CalibratedSandwich influence_and_Vsc(const ProductSample& sample,
                                                   const CalibrationResult& calib);

}  // namespace prodmed
