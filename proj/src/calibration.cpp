#include "prodmed/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "prodmed/error.hpp"
#include "prodmed/sensitivity_path.hpp"
#include "prodmed/stats.hpp"

namespace prodmed {
namespace {

constexpr double kMinDensity = 1e-6;

std::vector<double> radial_distances(const std::vector<FactorPoint>& pts, const FactorPoint& center,
                                     double unit) {
  const FactorBase base(center);
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& x : pts) out.push_back(unit * std::sqrt(base.squared_distance(x)));
  return out;
}

double scale_of(const std::vector<double>& r, ScaleMethod method) {
  return method == ScaleMethod::radial_median ? stats::lower_median(r) : stats::root_mean_square(r);
}

FactorDimensions dims_of(const ProductGeometry& g) {
  return {g.m.intrinsic_dimension(), g.n.intrinsic_dimension()};
}

}  // namespace

std::string to_string(ScaleMethod method) {
  return method == ScaleMethod::radial_median ? "radial-median" : "rms";
}

RadialScales radial_scales(const ProductSample& sample, ScaleMethod method, const SolverConfig& cfg) {
  if (sample.empty()) throw GeometryError("radial scales of an empty sample");
  const auto xs = sample.m_points();
  const auto ys = sample.n_points();
  const MarginalFit pm = marginal_median(xs, cfg);
  const MarginalFit qm = marginal_median(ys, cfg);
  RadialScales out{pm.location, qm.location, 0.0, 0.0, {}, {}, pm.converged && qm.converged, false};
  out.radial_m = radial_distances(xs, pm.location, sample.geometry().m.metric_scale);
  out.radial_n = radial_distances(ys, qm.location, sample.geometry().n.metric_scale);
  out.s_m = scale_of(out.radial_m, method);
  out.s_n = scale_of(out.radial_n, method);
  out.degenerate = !(out.s_m > 0.0) || !(out.s_n > 0.0);
  return out;
}

CalibratedAlpha calibrated_alpha(double s_m, double s_n, std::optional<FactorDimensions> dims,
                                 double epsilon) {
  if (!(s_m >= 0.0) || !(s_n >= 0.0)) throw InputError("radial scales must be nonnegative");
  if (!(s_m + s_n > 0.0)) throw NumericalError("calibration degenerate: both radial scales are zero");
  const double dm = dims ? dims->m : 1.0;
  const double dn = dims ? dims->n : 1.0;
  const double num = dm * s_n * s_n;
  const double raw = 2.0 * num / (num + dn * s_m * s_m);
  CalibratedAlpha out;
  out.raw = raw;
  const double clamped = std::clamp(raw, epsilon, 2.0 - epsilon);
  out.alpha = ScaleValue(clamped, epsilon);
  out.truncation_binds = clamped != raw;
  return out;
}

std::pair<double, double> calibration_gradient(double s_m, double s_n,
                                               std::optional<FactorDimensions> dims) {
  const double dm = dims ? dims->m : 1.0;
  const double dn = dims ? dims->n : 1.0;
  const double den = dm * s_n * s_n + dn * s_m * s_m;
  if (!(den > 0.0)) throw NumericalError("calibration degenerate: both radial scales are zero");
  const double k = 4.0 * dm * dn / (den * den);
  return {-k * s_m * s_n * s_n, k * s_n * s_m * s_m};
}

CalibrationResult calibrate(const ProductSample& sample, const CalibrationConfig& cfg) {
  const RadialScales rs = radial_scales(sample, cfg.scale_method, cfg.solver);
  std::optional<FactorDimensions> dims;
  if (cfg.dimension_adjusted) dims = dims_of(sample.geometry());
  const CalibratedAlpha ca = calibrated_alpha(rs.s_m, rs.s_n, dims, cfg.epsilon);
  ScaleValue alpha = ca.alpha;
  if (!cfg.truncate) {
    if (!(ca.raw > 0.0 && ca.raw < 2.0)) {
      throw NumericalError("calibration degenerate: a radial scale is zero");
    }
    alpha = ScaleValue(ca.raw, cfg.epsilon);
  }
  const ProductPoint init = cfg.init ? *cfg.init : ProductPoint{rs.p_hat, rs.q_hat};
  MedianFit fit = product_weiszfeld(alpha, sample, init, cfg.solver);
  return CalibrationResult{rs.p_hat,
                           rs.q_hat,
                           rs.s_m,
                           rs.s_n,
                           alpha,
                           ca.raw,
                           cfg.dimension_adjusted,
                           cfg.truncate && ca.truncation_binds,
                           cfg.truncate,
                           cfg.scale_method,
                           std::move(fit),
                           rs.radial_m,
                           rs.radial_n,
                           std::nullopt};
}

RescaleReport unit_rescale_check(const ProductSample& sample, double c_m, double c_n,
                                 const CalibrationConfig& cfg) {
  const CalibrationResult ref = calibrate(sample, cfg);
  const CalibrationResult res = calibrate(sample.with_units(c_m, c_n), cfg);
  RescaleReport out;
  out.c_m = c_m;
  out.c_n = c_n;
  out.alpha_reference = ref.alpha_sc.value();
  out.alpha_rescaled = res.alpha_sc.value();
  out.drift = product_displacement(ref.fit.location, res.fit.location);
  out.ratio_reference = out.alpha_reference / (2.0 - out.alpha_reference);
  out.ratio_rescaled = out.alpha_rescaled * c_m * c_m / ((2.0 - out.alpha_rescaled) * c_n * c_n);
  out.truncation_binds = ref.truncation_binds || res.truncation_binds;
  return out;
}

CalibratedSandwich influence_and_Vsc(const ProductSample& sample, const CalibrationResult& calib) {
  const std::size_t n = sample.size();
  if (calib.radial_m.size() != n || calib.radial_n.size() != n) {
    throw InputError("calibration result does not belong to this sample");
  }
  CalibratedSandwich out;
  InfluencePieces& inf = out.influence;
  inf.bandwidth_m = stats::silverman_bandwidth(calib.radial_m);
  inf.bandwidth_n = stats::silverman_bandwidth(calib.radial_n);
  if (!(inf.bandwidth_m > 0.0) || !(inf.bandwidth_n > 0.0)) {
    throw NumericalError("radial distances have no spread; density estimate unavailable");
  }
  inf.f_m = stats::gaussian_kde(calib.radial_m, calib.s_m, inf.bandwidth_m);
  inf.f_n = stats::gaussian_kde(calib.radial_n, calib.s_n, inf.bandwidth_n);
  out.unreliable = inf.f_m < kMinDensity || inf.f_n < kMinDensity;

  std::optional<FactorDimensions> dims;
  if (calib.dimension_adjusted) dims = dims_of(sample.geometry());
  std::tie(inf.dalpha_dsm, inf.dalpha_dsn) = calibration_gradient(calib.s_m, calib.s_n, dims);

  inf.phi_sm.resize(n);
  inf.phi_sn.resize(n);
  inf.phi_alpha.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    inf.phi_sm[i] = (0.5 - (calib.radial_m[i] <= calib.s_m ? 1.0 : 0.0)) / inf.f_m;
    inf.phi_sn[i] = (0.5 - (calib.radial_n[i] <= calib.s_n ? 1.0 : 0.0)) / inf.f_n;
  }
  if (!calib.truncation_binds) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inf.phi_alpha[i] = inf.dalpha_dsm * inf.phi_sm[i] + inf.dalpha_dsn * inf.phi_sn[i];
      mean += inf.phi_alpha[i];
    }
    mean /= static_cast<double>(n);
    for (double& v : inf.phi_alpha) v -= mean;
  }

  const ScaleValue alpha = calib.alpha_sc;
  const ProductPoint& m0 = calib.fit.location;
  const JacobianEstimate jac = estimate_A_alpha(alpha, m0, sample);
  const PathDerivative deriv = path_derivative(alpha, m0, sample, jac);
  out.A = jac.matrix;
  out.B = deriv.B_hat;
  const ProductChart chart(sample.geometry(), m0, alpha);
  Eigen::MatrixXd rows = score_coordinates(chart, sample, alpha);
  for (std::size_t i = 0; i < n; ++i) {
    rows.row(static_cast<Eigen::Index>(i)) += inf.phi_alpha[i] * out.B.transpose();
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(out.A);
  if (!lu.isInvertible()) throw NumericalError("score Jacobian is singular");
  const Eigen::MatrixXd a_inv = lu.inverse();
  const Eigen::MatrixXd v = a_inv * covariance_rows(rows) * a_inv.transpose();
  out.V_sc = 0.5 * (v + v.transpose());
  return out;
}

}  // namespace prodmed
