#include "prodmed/scaled_metric.hpp"

#include <cmath>

#include "prodmed/error.hpp"

namespace prodmed {

FactorSquares factor_squares(const ProductGeometry& geometry, const ProductPoint& m,
                             const ProductPoint& z) {
  const double cm = geometry.m.metric_scale;
  const double cn = geometry.n.metric_scale;
  const double dm = factor_distance(m.p, z.p);
  const double dn = factor_distance(m.q, z.q);
  return {cm * cm * dm * dm, cn * cn * dn * dn};
}

double scaled_distance(ScaleValue alpha, FactorSquares s) {
  return std::sqrt(alpha.m_weight() * s.a + alpha.n_weight() * s.b);
}

double scaled_distance(ScaleValue alpha, const ProductGeometry& geometry, const ProductPoint& m,
                       const ProductPoint& z) {
  return scaled_distance(alpha, factor_squares(geometry, m, z));
}

double scaled_distance(ScaleValue alpha, const ProductPoint& m, const ProductPoint& z) {
  const double dm = factor_distance(m.p, z.p);
  const double dn = factor_distance(m.q, z.q);
  return scaled_distance(alpha, FactorSquares{dm * dm, dn * dn});
}

std::optional<AlphaDerivatives> alpha_derivatives(ScaleValue alpha, double a, double b) {
  const double r2 = alpha.m_weight() * a + alpha.n_weight() * b;
  if (!(r2 > kCoincidenceGuard)) return std::nullopt;
  const double r = std::sqrt(r2);
  const double diff = a - b;
  return AlphaDerivatives{r, diff / (2.0 * r), -diff * diff / (4.0 * r2 * r)};
}

std::optional<ScoreVector> median_score(ScaleValue alpha, const ProductGeometry& geometry,
                                        const ProductPoint& m, const ProductPoint& z) {
  geometry.check(m);
  geometry.check(z);
  const auto lm = FactorBase(m.p).log(z.p);
  const auto ln = FactorBase(m.q).log(z.q);
  const double cm2 = geometry.m.metric_scale * geometry.m.metric_scale;
  const double cn2 = geometry.n.metric_scale * geometry.n.metric_scale;
  const double r =
      std::sqrt(alpha.m_weight() * cm2 * lm.squared_distance + alpha.n_weight() * cn2 * ln.squared_distance);
  if (!(r > kCoincidenceGuard)) return std::nullopt;
  ProductTangent dir{lm.log, ln.log};
  dir *= 1.0 / r;
  return ScoreVector{std::move(dir), r};
}

std::optional<ScoreVector> median_score(ScaleValue alpha, const ProductPoint& m,
                                        const ProductPoint& z) {
  const ProductGeometry g{{m.p.kind(), static_cast<int>(m.p.dimension()), 1.0},
                          {m.q.kind(), static_cast<int>(m.q.dimension()), 1.0}};
  return median_score(alpha, g, m, z);
}

double product_norm(const ProductGeometry& geometry, const ProductPoint& m,
                    const ProductTangent& t, double alpha) {
  const double nu = FactorBase(m.p).norm(t.u) * geometry.m.metric_scale;
  const double nv = FactorBase(m.q).norm(t.v) * geometry.n.metric_scale;
  return std::sqrt(alpha * nu * nu + (2.0 - alpha) * nv * nv);
}

std::optional<double> balance_value(ScaleValue alpha, double a, double b) {
  const double wa = alpha.m_weight() * a;
  const double wb = alpha.n_weight() * b;
  const double den = wa + wb;
  if (!(den > kCoincidenceGuard)) return std::nullopt;
  return (wa - wb) / den;
}

std::optional<double> balance_slope(ScaleValue alpha, double a, double b) {
  const double den = alpha.m_weight() * a + alpha.n_weight() * b;
  if (!(den > kCoincidenceGuard)) return std::nullopt;
  return 4.0 * a * b / (den * den);
}

double empirical_objective(ScaleValue alpha, const ProductPoint& m, const ProductSample& sample) {
  if (sample.empty()) throw GeometryError("empirical objective of an empty sample");
  const FactorBase pm(m.p);
  const FactorBase qm(m.q);
  const double cm2 = sample.geometry().m.metric_scale * sample.geometry().m.metric_scale;
  const double cn2 = sample.geometry().n.metric_scale * sample.geometry().n.metric_scale;
  double total = 0.0;
  for (const auto& z : sample.points()) {
    total += scaled_distance(alpha, FactorSquares{cm2 * pm.squared_distance(z.p),
                                                  cn2 * qm.squared_distance(z.q)});
  }
  return total / static_cast<double>(sample.size());
}

// ---------------------------------------------------------------------------

ObservationTerms::ObservationTerms(const ProductSample& sample, const ProductPoint& m)
    : geometry_(sample.geometry()), location_(m), m_base_(m.p), n_base_(m.q) {
  geometry_.check(m);
  const double cm2 = geometry_.m.metric_scale * geometry_.m.metric_scale;
  const double cn2 = geometry_.n.metric_scale * geometry_.n.metric_scale;
  squares_.reserve(sample.size());
  u_.reserve(sample.size());
  v_.reserve(sample.size());
  for (const auto& z : sample.points()) {
    auto lm = m_base_.log(z.p);
    auto ln = n_base_.log(z.q);
    squares_.push_back({cm2 * lm.squared_distance, cn2 * ln.squared_distance});
    u_.push_back(std::move(lm.log));
    v_.push_back(std::move(ln.log));
  }
}

double ObservationTerms::objective(ScaleValue alpha) const {
  if (squares_.empty()) throw GeometryError("empirical objective of an empty sample");
  double total = 0.0;
  for (const auto& s : squares_) total += scaled_distance(alpha, s);
  return total / static_cast<double>(squares_.size());
}

ObservationTerms::ScoreSum ObservationTerms::score_sum(ScaleValue alpha, double guard) const {
  ScoreSum out{ProductTangent::zero_at(location_), 0.0, 0};
  for (std::size_t i = 0; i < squares_.size(); ++i) {
    const double r = scaled_distance(alpha, squares_[i]);
    if (!(r > guard)) {
      ++out.coincident;
      continue;
    }
    const double w = 1.0 / r;
    out.sum.u.axpy(w, u_[i]);
    out.sum.v.axpy(w, v_[i]);
    out.inverse_r_sum += w;
  }
  return out;
}

ProductTangent ObservationTerms::score_alpha_derivative_sum(ScaleValue alpha, double guard) const {
  ProductTangent out = ProductTangent::zero_at(location_);
  for (std::size_t i = 0; i < squares_.size(); ++i) {
    const double r = scaled_distance(alpha, squares_[i]);
    if (!(r > guard)) continue;
    const double w = -(squares_[i].a - squares_[i].b) / (2.0 * r * r * r);
    out.u.axpy(w, u_[i]);
    out.v.axpy(w, v_[i]);
  }
  return out;
}

}  // namespace prodmed
