#include "prodmed/median_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "prodmed/error.hpp"

namespace prodmed {
namespace {

constexpr int kMaxBacktracks = 60;

double reference_norm(const ObservationTerms& terms, const ProductTangent& t) {
  const double nu = terms.m_base().norm(t.u);
  const double nv = terms.n_base().norm(t.v);
  return std::sqrt(nu * nu + nv * nv);
}

/// alpha-metric norm with unit scales, used for the Vardi-Zhang test.
double scaled_norm(const ObservationTerms& terms, const ProductTangent& t, ScaleValue alpha) {
  const double cm = terms.geometry().m.metric_scale;
  const double cn = terms.geometry().n.metric_scale;
  const double nu = terms.m_base().norm(t.u) * cm;
  const double nv = terms.n_base().norm(t.v) * cn;
  return std::sqrt(alpha.m_weight() * nu * nu + alpha.n_weight() * nv * nv);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

FactorPoint factor_initial_point(const std::vector<FactorPoint>& pts) {
  if (pts.front().kind() == GeometryKind::euclidean) {
    const Eigen::Index d = pts.front().dimension();
    Eigen::VectorXd out(d);
    std::vector<double> col(pts.size());
    for (Eigen::Index k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < pts.size(); ++i) col[i] = pts[i].matrix()(k, 0);
      out(k) = median_of(col);
    }
    return FactorPoint::euclidean(std::move(out));
  }
  const std::size_t n = pts.size();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const FactorBase base(pts[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(std::max(0.0, base.squared_distance(pts[j])));
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  }
  Eigen::Index best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) s += dist(i, j);
    if (s < best_value) {
      best_value = s;
      best = i;
    }
  }
  return pts[static_cast<std::size_t>(best)];
}

std::optional<ProductPoint> step_from(const ObservationTerms& terms, const ProductTangent& t) {
  auto p = terms.m_base().exp(t.u);
  if (!p) return std::nullopt;
  auto q = terms.n_base().exp(t.v);
  if (!q) return std::nullopt;
  return ProductPoint{*std::move(p), *std::move(q)};
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iterations < 1) throw InputError("max_iterations must be at least 1");
  if (!(tolerance > 0.0)) throw InputError("solver tolerance must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw InputError("step shrink factor must lie in (0,1)");
  if (!(coincidence_guard >= 0.0)) throw InputError("coincidence guard must be nonnegative");
}

ProductPoint auto_initial_point(const ProductSample& sample) {
  if (sample.empty()) throw GeometryError("median of an empty sample");
  return {factor_initial_point(sample.m_points()), factor_initial_point(sample.n_points())};
}

MedianFit product_weiszfeld(ScaleValue alpha, const ProductSample& sample,
                            const std::optional<ProductPoint>& init, const SolverConfig& cfg) {
  cfg.validate();
  if (sample.empty()) throw GeometryError("median of an empty sample");
  ProductPoint m = init ? *init : auto_initial_point(sample);
  sample.geometry().check(m);

  auto terms = std::make_unique<ObservationTerms>(sample, m);
  double objective = terms->objective(alpha);
  MedianFit fit{m, alpha, objective, 0, false, 0.0, 0.0, 0.0, {objective}};

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    fit.iterations = it;
    const auto ss = terms->score_sum(alpha, cfg.coincidence_guard);
    if (ss.inverse_r_sum == 0.0) {
      // Every observation coincides with the iterate.
      fit.converged = true;
      fit.final_step_norm = 0.0;
      break;
    }
    ProductTangent step = ss.sum;
    step *= 1.0 / ss.inverse_r_sum;
    if (ss.coincident > 0) {
      const double pull = scaled_norm(*terms, ss.sum, alpha);
      const double eta = static_cast<double>(ss.coincident);
      step *= pull > eta ? 1.0 - eta / pull : 0.0;
    }
    const double full_norm = reference_norm(*terms, step);
    if (full_norm == 0.0) {
      fit.converged = true;
      fit.final_step_norm = 0.0;
      break;
    }

    const double slack = 1e-13 * std::max(1.0, std::abs(objective));
    double lambda = 1.0;
    std::unique_ptr<ObservationTerms> next;
    double next_objective = 0.0;
    for (int k = 0; k < kMaxBacktracks; ++k) {
      ProductTangent trial = step;
      trial *= lambda;
      if (auto cand = step_from(*terms, trial)) {
        auto cand_terms = std::make_unique<ObservationTerms>(sample, *cand);
        const double value = cand_terms->objective(alpha);
        if (value <= objective + slack) {
          next = std::move(cand_terms);
          next_objective = value;
          break;
        }
      }
      lambda *= cfg.shrink;
    }
    if (!next) {
      fit.final_step_norm = 0.0;
      fit.converged = full_norm <= cfg.tolerance;
      break;
    }
    terms = std::move(next);
    objective = next_objective;
    fit.objective_trace.push_back(objective);
    fit.final_step_norm = lambda * full_norm;
    if (full_norm <= cfg.tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.location = terms->location();
  fit.objective = objective;
  const auto ss = terms->score_sum(alpha, cfg.coincidence_guard);
  const double n = static_cast<double>(terms->size());
  ProductTangent g = ss.sum;
  g *= 1.0 / n;
  fit.gradient_norm = scaled_norm(*terms, g, ScaleValue(1.0));
  const std::size_t active = terms->size() - ss.coincident;
  fit.mean_inverse_distance = active > 0 ? ss.inverse_r_sum / static_cast<double>(active) : 0.0;
  return fit;
}

MarginalFit marginal_median(std::span<const FactorPoint> points, const SolverConfig& cfg) {
  if (points.empty()) throw GeometryError("median of an empty sample");
  // A product with a constant one-dimensional second factor reduces the product
  // iteration to the single-factor Riemannian Weiszfeld iteration.
  const FactorPoint origin = FactorPoint::euclidean(Eigen::VectorXd::Zero(1));
  const FactorPoint& first = points.front();
  const ManifoldDescriptor desc{first.kind(), static_cast<int>(first.dimension()), 1.0};
  std::vector<ProductPoint> pts;
  pts.reserve(points.size());
  for (const auto& x : points) pts.push_back({x, origin});
  const ProductSample sample({desc, ManifoldDescriptor::euclidean(1)}, std::move(pts));
  const MedianFit fit = product_weiszfeld(ScaleValue(1.0), sample, std::nullopt, cfg);
  return {fit.location.p, fit.iterations, fit.converged, fit.objective};
}

Eigen::VectorXd mean_score_coordinates(const ProductChart& chart, const ProductSample& sample,
                                       const ProductPoint& at, ScaleValue alpha) {
  const ObservationTerms terms(sample, at);
  ProductTangent g = terms.score_sum(alpha).sum;
  g *= 1.0 / static_cast<double>(terms.size());
  return chart.coordinates(g);
}

double default_difference_step(const ProductPoint& m) {
  const double size = std::sqrt(m.p.matrix().squaredNorm() + m.q.matrix().squaredNorm());
  return 1e-4 * (1.0 + size);
}

JacobianEstimate estimate_A_alpha(ScaleValue alpha, const ProductPoint& m_hat,
                                  const ProductSample& sample, std::optional<double> step) {
  if (sample.empty()) throw GeometryError("Jacobian of an empty sample");
  const ProductChart chart(sample.geometry(), m_hat, alpha);
  const double h = step ? *step : default_difference_step(m_hat);
  if (!(h > 0.0) || !std::isfinite(h)) throw NumericalError("finite-difference step underflow");
  const int dim = chart.dimension();
  Eigen::MatrixXd jac(dim, dim);
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(k) = h;
    const auto plus = chart.exp(e);
    const auto minus = chart.exp(-e);
    if (!plus || !minus) throw NumericalError("finite-difference step leaves the SPD cone");
    jac.col(k) = (mean_score_coordinates(chart, sample, *plus, alpha) -
                  mean_score_coordinates(chart, sample, *minus, alpha)) /
                 (2.0 * h);
  }
  JacobianEstimate out;
  out.matrix = 0.5 * (jac + jac.transpose());
  out.step = h;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  out.ill_conditioned = !(out.condition_number <= 1e10);
  return out;
}

Eigen::MatrixXd score_coordinates(const ProductChart& chart, const ProductSample& sample,
                                  ScaleValue alpha) {
  const ObservationTerms terms(sample, chart.base());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(terms.size()), chart.dimension());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double r = scaled_distance(alpha, terms.squares()[i]);
    if (!(r > kCoincidenceGuard)) continue;
    ProductTangent psi{terms.u(i), terms.v(i)};
    psi *= 1.0 / r;
    out.row(static_cast<Eigen::Index>(i)) = chart.coordinates(psi).transpose();
  }
  return out;
}

Eigen::MatrixXd covariance_rows(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw GeometryError("covariance of an empty sample");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(x.rows());
  return 0.5 * (cov + cov.transpose());
}

SandwichPieces estimate_sigma_and_sandwich(ScaleValue alpha, const ProductPoint& m_hat,
                                           const ProductSample& sample) {
  const ProductChart chart(sample.geometry(), m_hat, alpha);
  const JacobianEstimate a = estimate_A_alpha(alpha, m_hat, sample);
  SandwichPieces out;
  out.A_hat = a.matrix;
  out.ill_conditioned = a.ill_conditioned;
  out.scores = score_coordinates(chart, sample, alpha);
  out.Sigma_hat = covariance_rows(out.scores);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(out.A_hat);
  if (!lu.isInvertible()) throw NumericalError("score Jacobian is singular");
  const Eigen::MatrixXd a_inv = lu.inverse();
  const Eigen::MatrixXd v = a_inv * out.Sigma_hat * a_inv.transpose();
  out.V_hat = 0.5 * (v + v.transpose());
  out.frame =
      "normal coordinates at the median, orthonormal for the alpha-scaled metric; M block "
      "(sqrt(alpha) c_M times factor coordinates) followed by N block (sqrt(2-alpha) c_N)";
  return out;
}

}  // namespace prodmed
