#include "prodmed/product.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prodmed/error.hpp"

namespace prodmed {

ScaleValue::ScaleValue(double alpha, double epsilon) : alpha_(alpha), epsilon_(epsilon) {
  if (!(alpha > 0.0 && alpha < 2.0)) {
    throw GeometryError("scale alpha must lie in (0,2), got " + std::to_string(alpha));
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw GeometryError("truncation epsilon must lie in (0,1), got " + std::to_string(epsilon));
  }
}

bool ScaleValue::in_interval() const noexcept {
  return alpha_ >= epsilon_ && alpha_ <= 2.0 - epsilon_;
}

ScaleValue ScaleValue::clamped() const {
  return ScaleValue(std::clamp(alpha_, epsilon_, 2.0 - epsilon_), epsilon_);
}

ProductSample::ProductSample(ProductGeometry geometry, std::vector<ProductPoint> points)
    : geometry_(geometry), points_(std::move(points)) {
  if (!(geometry_.m.metric_scale > 0.0) || !(geometry_.n.metric_scale > 0.0)) {
    throw GeometryError("factor metric scales must be positive");
  }
  for (const auto& z : points_) geometry_.check(z);
}

ProductSample ProductSample::with_units(double c_m, double c_n) const {
  if (!(c_m > 0.0) || !(c_n > 0.0)) throw GeometryError("unit multipliers must be positive");
  ProductSample out = *this;
  out.geometry_.m.metric_scale *= c_m;
  out.geometry_.n.metric_scale *= c_n;
  return out;
}

ProductSample ProductSample::subset(std::span<const std::size_t> indices) const {
  std::vector<ProductPoint> pts;
  pts.reserve(indices.size());
  for (std::size_t i : indices) pts.push_back(points_.at(i));
  ProductSample out(geometry_, {});
  out.points_ = std::move(pts);
  return out;
}

std::vector<FactorPoint> ProductSample::m_points() const {
  std::vector<FactorPoint> out;
  out.reserve(points_.size());
  for (const auto& z : points_) out.push_back(z.p);
  return out;
}

std::vector<FactorPoint> ProductSample::n_points() const {
  std::vector<FactorPoint> out;
  out.reserve(points_.size());
  for (const auto& z : points_) out.push_back(z.q);
  return out;
}

ProductChart::ProductChart(const ProductGeometry& geometry, const ProductPoint& base,
                           ScaleValue alpha)
    : base_(base),
      m_(base.p),
      n_(base.q),
      dim_m_(m_.intrinsic_dimension()),
      dim_n_(n_.intrinsic_dimension()),
      scale_m_(std::sqrt(alpha.m_weight()) * geometry.m.metric_scale),
      scale_n_(std::sqrt(alpha.n_weight()) * geometry.n.metric_scale) {
  geometry.check(base);
}

Eigen::VectorXd ProductChart::coordinates(const ProductTangent& t) const {
  Eigen::VectorXd c(dimension());
  c.head(dim_m_) = scale_m_ * m_.coordinates(t.u);
  c.tail(dim_n_) = scale_n_ * n_.coordinates(t.v);
  return c;
}

ProductTangent ProductChart::tangent(const Eigen::VectorXd& c) const {
  if (c.size() != dimension()) throw GeometryError("chart coordinate vector has wrong size");
  return {m_.from_coordinates(c.head(dim_m_) / scale_m_),
          n_.from_coordinates(c.tail(dim_n_) / scale_n_)};
}

std::optional<ProductPoint> ProductChart::exp(const Eigen::VectorXd& c) const {
  const ProductTangent t = tangent(c);
  auto p = m_.exp(t.u);
  if (!p) return std::nullopt;
  auto q = n_.exp(t.v);
  if (!q) return std::nullopt;
  return ProductPoint{*std::move(p), *std::move(q)};
}

Eigen::VectorXd ProductChart::log(const ProductPoint& target) const {
  return coordinates({m_.log(target.p).log, n_.log(target.q).log});
}

double product_displacement(const ProductPoint& a, const ProductPoint& b) {
  const double dm = factor_distance(a.p, b.p);
  const double dn = factor_distance(a.q, b.q);
  return std::sqrt(dm * dm + dn * dn);
}

}  // namespace prodmed
