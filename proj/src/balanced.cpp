#include "prodmed/balanced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prodmed/error.hpp"

namespace prodmed {
namespace {

constexpr double kWaldQuantile = 1.96;
constexpr int kOscillationWindow = 10;
constexpr double kOscillationAmplitude = 1e-4;

std::optional<FactorDimensions> dims_if(bool adjusted, const ProductSample& sample) {
  if (!adjusted) return std::nullopt;
  return FactorDimensions{sample.geometry().m.intrinsic_dimension(),
                          sample.geometry().n.intrinsic_dimension()};
}

double h_value(double alpha, const FactorSquares& s, bool& degenerate) {
  const double wa = alpha * s.a;
  const double wb = (2.0 - alpha) * s.b;
  const double den = wa + wb;
  degenerate = !(den >= kCoincidenceGuard);
  return degenerate ? 0.0 : (wa - wb) / den;
}

}  // namespace

BalanceFunction::BalanceFunction(std::vector<FactorSquares> squares,
                                 std::optional<FactorDimensions> dims)
    : squares_(std::move(squares)) {
  if (dims) {
    if (dims->m < 1 || dims->n < 1) throw InputError("factor dimensions must be positive");
    for (auto& s : squares_) {
      s.a /= dims->m;
      s.b /= dims->n;
    }
  }
}

BalanceFunction BalanceFunction::at(const ProductPoint& m, const ProductSample& sample,
                                    std::optional<FactorDimensions> dims) {
  sample.geometry().check(m);
  const FactorBase pm(m.p);
  const FactorBase qm(m.q);
  const double cm2 = sample.geometry().m.metric_scale * sample.geometry().m.metric_scale;
  const double cn2 = sample.geometry().n.metric_scale * sample.geometry().n.metric_scale;
  std::vector<FactorSquares> sq;
  sq.reserve(sample.size());
  for (const auto& z : sample.points()) {
    sq.push_back({cm2 * pm.squared_distance(z.p), cn2 * qm.squared_distance(z.q)});
  }
  return BalanceFunction(std::move(sq), dims);
}

double BalanceFunction::operator()(double alpha) const {
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& s : squares_) {
    bool degenerate = false;
    const double h = h_value(alpha, s, degenerate);
    if (degenerate) continue;
    total += h;
    ++used;
  }
  if (used == 0) throw NumericalError("balance function undefined: every observation is degenerate");
  return total / static_cast<double>(used);
}

std::size_t BalanceFunction::degenerate(double alpha) const {
  std::size_t count = 0;
  for (const auto& s : squares_) {
    bool degenerate = false;
    (void)h_value(alpha, s, degenerate);
    if (degenerate) ++count;
  }
  return count;
}

std::vector<double> BalanceFunction::terms(double alpha) const {
  std::vector<double> out;
  out.reserve(squares_.size());
  for (const auto& s : squares_) {
    bool degenerate = false;
    out.push_back(h_value(alpha, s, degenerate));
  }
  return out;
}

bool BalanceFunction::strictly_monotone() const {
  return std::any_of(squares_.begin(), squares_.end(),
                     [](const FactorSquares& s) { return s.a > 0.0 && s.b > 0.0; });
}

double balance_mean(ScaleValue alpha, const ProductPoint& m, const ProductSample& sample,
                    std::optional<FactorDimensions> dims) {
  return BalanceFunction::at(m, sample, dims)(alpha.value());
}

std::string to_string(BracketStatus status) {
  switch (status) {
    case BracketStatus::root: return "root";
    case BracketStatus::boundary_low: return "boundary-low";
    case BracketStatus::boundary_high: return "boundary-high";
    case BracketStatus::non_unique: return "non-unique";
  }
  return "unknown";
}

BisectionResult bisect_alpha(const BalanceFunction& h, double epsilon, double tol_alpha) {
  if (!(tol_alpha > 0.0)) throw InputError("bisection tolerance must be positive");
  double lo = epsilon;
  double hi = 2.0 - epsilon;
  const double h_lo = h(lo);
  const double h_hi = h(hi);
  if (h_lo == 0.0 && h_hi == 0.0) return {ScaleValue(1.0, epsilon), BracketStatus::non_unique, 0.0, 0};
  if (h_lo >= 0.0) {
    if (h_lo == 0.0) return {ScaleValue(lo, epsilon), BracketStatus::root, 0.0, 0};
    return {ScaleValue(lo, epsilon), BracketStatus::boundary_low, h_lo, 0};
  }
  if (h_hi <= 0.0) {
    if (h_hi == 0.0) return {ScaleValue(hi, epsilon), BracketStatus::root, 0.0, 0};
    return {ScaleValue(hi, epsilon), BracketStatus::boundary_high, h_hi, 0};
  }
  int it = 0;
  while (hi - lo > tol_alpha) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = h(mid);
    ++it;
    if (value == 0.0) {
      lo = hi = mid;
      break;
    }
    (value < 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  return {ScaleValue(root, epsilon), BracketStatus::root, h(root), it};
}

BisectionResult bisect_alpha(const ProductPoint& m, const ProductSample& sample, double epsilon,
                             double tol_alpha, std::optional<FactorDimensions> dims) {
  return bisect_alpha(BalanceFunction::at(m, sample, dims), epsilon, tol_alpha);
}

BalancedFit solve_balanced(const ProductSample& sample, const BalancedConfig& cfg) {
  if (sample.size() < 2) throw InputError("balanced estimation needs at least two observations");
  if (cfg.max_outer_iterations < 1) throw InputError("outer iteration cap must be at least 1");
  const auto dims = dims_if(cfg.dimension_adjusted, sample);
  ScaleValue alpha(std::clamp(cfg.initial_alpha, cfg.epsilon, 2.0 - cfg.epsilon), cfg.epsilon);
  ProductPoint m = cfg.init ? *cfg.init : auto_initial_point(sample);

  BalancedFit out{m, alpha, 0.0, 0.0, 0, false, false, BracketStatus::root,
                  cfg.dimension_adjusted, {}, {}, {}};
  out.alpha_trace.push_back(alpha.value());
  bool inner_ok = true;
  int plain_steps = 0;
  for (int outer = 1; outer <= cfg.max_outer_iterations; ++outer) {
    out.outer_iterations = outer;
    const MedianFit fit = product_weiszfeld(alpha, sample, m, cfg.solver);
    inner_ok = fit.converged;
    const double step = product_displacement(m, fit.location);
    m = fit.location;
    const BisectionResult bis = bisect_alpha(m, sample, cfg.epsilon, cfg.alpha_tolerance, dims);
    out.bracket = bis.status;
    double next = bis.alpha.value();
    if (out.damped) {
      next = 0.5 * (alpha.value() + next);
    } else if (cfg.accelerate && plain_steps >= 2) {
      // alpha_trace ends with a0, a1 = T(a0); next = T(a1).
      const double a0 = out.alpha_trace[out.alpha_trace.size() - 2];
      const double a1 = out.alpha_trace.back();
      const double curvature = next - 2.0 * a1 + a0;
      const double jump = std::abs(a1 - a0);
      if (std::abs(curvature) > 1e-14 && jump > cfg.alpha_step_tolerance) {
        const double extrapolated = a0 - (a1 - a0) * (a1 - a0) / curvature;
        if (extrapolated >= cfg.epsilon && extrapolated <= 2.0 - cfg.epsilon) {
          next = extrapolated;
          plain_steps = -1;
        }
      }
    }
    ++plain_steps;
    const double delta = std::abs(next - alpha.value());
    alpha = alpha.with_value(next);
    out.alpha_trace.push_back(next);

    if (step < cfg.location_tolerance && delta < cfg.alpha_step_tolerance && inner_ok) {
      out.converged = true;
      break;
    }
    if (!out.damped && static_cast<int>(out.alpha_trace.size()) > kOscillationWindow) {
      const auto tail = out.alpha_trace.end() - kOscillationWindow;
      const auto [mn, mx] = std::minmax_element(tail, out.alpha_trace.end());
      // A contracting sequence shrinks its steps; a cycle keeps its amplitude.
      const double first_step = std::abs(*(tail + 1) - *tail);
      if (*mx - *mn > kOscillationAmplitude && delta > 0.5 * first_step) out.damped = true;
    }
  }

  // Refit at the final scale so that the location solves the median equation exactly.
  const MedianFit final_fit = product_weiszfeld(alpha, sample, m, cfg.solver);
  out.location = final_fit.location;
  out.alpha_bal = alpha;
  if (!final_fit.converged) out.converged = false;
  const BalanceFunction h = BalanceFunction::at(out.location, sample, dims);
  out.H_residual = h(alpha.value());
  out.estimating_residual = std::hypot(final_fit.gradient_norm, out.H_residual);

  if (cfg.compute_sandwich) {
    try {
      const BalancedSandwich sw = balanced_sandwich(out.location, alpha, sample, cfg.dimension_adjusted);
      out.J_hat = sw.J_hat;
      out.Xi_cov = sw.Xi_cov;
      out.alpha_se = sw.alpha_se;
      out.wald_lo = sw.wald_lo;
      out.wald_hi = sw.wald_hi;
      out.sandwich_available = !sw.singular;
    } catch (const NumericalError&) {
      out.sandwich_available = false;
    }
  }
  return out;
}

namespace {

/// P_n Xi at (exp_chart(c), alpha) expressed in the fixed chart.
Eigen::VectorXd mean_xi(const ProductChart& chart, const ProductSample& sample,
                        const ProductPoint& at, ScaleValue a, std::optional<FactorDimensions> dims) {
  const ObservationTerms terms(sample, at);
  ProductTangent g = terms.score_sum(a).sum;
  g *= 1.0 / static_cast<double>(terms.size());
  Eigen::VectorXd out(chart.dimension() + 1);
  out.head(chart.dimension()) = chart.coordinates(g);
  out(chart.dimension()) = BalanceFunction(terms.squares(), dims)(a.value());
  return out;
}

}  // namespace

BalancedSandwich balanced_sandwich(const ProductPoint& m_hat, ScaleValue alpha_hat,
                                   const ProductSample& sample, bool dimension_adjusted) {
  const auto dims = dims_if(dimension_adjusted, sample);
  const ProductChart chart(sample.geometry(), m_hat, alpha_hat);
  const int dim = chart.dimension();
  const double a0 = alpha_hat.value();
  const double h_m = default_difference_step(m_hat);
  const double h_a = 1e-4 * std::min(a0, 2.0 - a0);

  BalancedSandwich out;
  out.J_hat.resize(dim + 1, dim + 1);
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(k) = h_m;
    const auto plus = chart.exp(e);
    const auto minus = chart.exp(-e);
    if (!plus || !minus) throw NumericalError("finite-difference step leaves the SPD cone");
    out.J_hat.col(k) = (mean_xi(chart, sample, *plus, alpha_hat, dims) -
                        mean_xi(chart, sample, *minus, alpha_hat, dims)) /
                       (2.0 * h_m);
  }
  out.J_hat.col(dim) = (mean_xi(chart, sample, m_hat, alpha_hat.with_value(a0 + h_a), dims) -
                        mean_xi(chart, sample, m_hat, alpha_hat.with_value(a0 - h_a), dims)) /
                       (2.0 * h_a);

  const std::size_t n = sample.size();
  out.Xi.resize(static_cast<Eigen::Index>(n), dim + 1);
  out.Xi.leftCols(dim) = score_coordinates(chart, sample, alpha_hat);
  const auto hv = BalanceFunction::at(m_hat, sample, dims).terms(a0);
  for (std::size_t i = 0; i < n; ++i) out.Xi(static_cast<Eigen::Index>(i), dim) = hv[i];
  out.Xi_cov = covariance_rows(out.Xi);

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(out.J_hat);
  if (!lu.isInvertible()) {
    out.singular = true;
    out.alpha_se = std::numeric_limits<double>::quiet_NaN();
    out.wald_lo = out.wald_hi = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const Eigen::MatrixXd j_inv = lu.inverse();
  const Eigen::MatrixXd v = j_inv * out.Xi_cov * j_inv.transpose();
  out.alpha_se = std::sqrt(std::max(0.0, v(dim, dim)) / static_cast<double>(n));
  out.wald_lo = a0 - kWaldQuantile * out.alpha_se;
  out.wald_hi = a0 + kWaldQuantile * out.alpha_se;
  return out;
}

BalancedSandwich balanced_sandwich(const BalancedFit& fit, const ProductSample& sample) {
  return balanced_sandwich(fit.location, fit.alpha_bal, sample, fit.dimension_adjusted);
}

}  // namespace prodmed
