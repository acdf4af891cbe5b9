#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "prodmed/manifold.hpp"

namespace prodmed {

inline constexpr double kDefaultEpsilon = 0.05;

/// Relative factor weight alpha in (0,2) with the truncation interval [eps, 2-eps].
/// alpha itself is not required to lie in the interval; `clamped()` enforces it.
class ScaleValue {
 public:
  explicit ScaleValue(double alpha, double epsilon = kDefaultEpsilon);

  [[nodiscard]] double value() const noexcept { return alpha_; }
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
  [[nodiscard]] double lower() const noexcept { return epsilon_; }
  [[nodiscard]] double upper() const noexcept { return 2.0 - epsilon_; }
  [[nodiscard]] double m_weight() const noexcept { return alpha_; }
  [[nodiscard]] double n_weight() const noexcept { return 2.0 - alpha_; }
  [[nodiscard]] bool in_interval() const noexcept;
  [[nodiscard]] ScaleValue clamped() const;
  [[nodiscard]] ScaleValue with_value(double alpha) const { return ScaleValue(alpha, epsilon_); }

 private:
  double alpha_;
  double epsilon_;
};

struct ProductPoint {
  FactorPoint p;
  FactorPoint q;
};

struct ProductTangent {
  TangentVector u;
  TangentVector v;

  ProductTangent& operator+=(const ProductTangent& o) {
    u += o.u;
    v += o.v;
    return *this;
  }
  ProductTangent& operator*=(double s) {
    u *= s;
    v *= s;
    return *this;
  }
  [[nodiscard]] static ProductTangent zero_at(const ProductPoint& m) {
    return {TangentVector::zero_at(m.p), TangentVector::zero_at(m.q)};
  }
};

struct ProductGeometry {
  ManifoldDescriptor m;
  ManifoldDescriptor n;

  [[nodiscard]] int intrinsic_dimension() const noexcept {
    return m.intrinsic_dimension() + n.intrinsic_dimension();
  }
  void check(const ProductPoint& z) const {
    m.check(z.p);
    n.check(z.q);
  }
  friend bool operator==(const ProductGeometry&, const ProductGeometry&) = default;
};

/// Ordered observations Z_1..Z_n on M x N.
class ProductSample {
 public:
  /// Validates every point against the geometry; throws GeometryError.
  ProductSample(ProductGeometry geometry, std::vector<ProductPoint> points);

  [[nodiscard]] const ProductGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] std::span<const ProductPoint> points() const noexcept { return points_; }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
  [[nodiscard]] const ProductPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Same points with factor distances multiplied by c_m and c_n.
  [[nodiscard]] ProductSample with_units(double c_m, double c_n) const;
  [[nodiscard]] ProductSample subset(std::span<const std::size_t> indices) const;
  [[nodiscard]] std::vector<FactorPoint> m_points() const;
  [[nodiscard]] std::vector<FactorPoint> n_points() const;

 private:
  ProductGeometry geometry_;
  std::vector<ProductPoint> points_;
};

/// Normal coordinates at a product point, orthonormal for the alpha-scaled metric
/// (including the factor unit scales): the M block is sqrt(alpha) c_M times the
/// factor coordinates, the N block sqrt(2-alpha) c_N times.
class ProductChart {
 public:
  ProductChart(const ProductGeometry& geometry, const ProductPoint& base, ScaleValue alpha);

  [[nodiscard]] int dimension() const noexcept { return dim_m_ + dim_n_; }
  [[nodiscard]] int m_dimension() const noexcept { return dim_m_; }
  [[nodiscard]] int n_dimension() const noexcept { return dim_n_; }
  [[nodiscard]] double m_scale() const noexcept { return scale_m_; }
  [[nodiscard]] double n_scale() const noexcept { return scale_n_; }
  [[nodiscard]] const ProductPoint& base() const noexcept { return base_; }
  [[nodiscard]] const FactorBase& m_base() const noexcept { return m_; }
  [[nodiscard]] const FactorBase& n_base() const noexcept { return n_; }

  [[nodiscard]] Eigen::VectorXd coordinates(const ProductTangent& t) const;
  [[nodiscard]] ProductTangent tangent(const Eigen::VectorXd& c) const;
  [[nodiscard]] std::optional<ProductPoint> exp(const Eigen::VectorXd& c) const;
  [[nodiscard]] Eigen::VectorXd log(const ProductPoint& target) const;

 private:
  ProductPoint base_;
  FactorBase m_;
  FactorBase n_;
  int dim_m_;
  int dim_n_;
  double scale_m_;
  double scale_n_;
};

/// Displacement {d_M(a.p, b.p)^2 + d_N(a.q, b.q)^2}^{1/2} in the factors' own
/// (unit-free) metrics.
[[nodiscard]] double product_displacement(const ProductPoint& a, const ProductPoint& b);

}  // namespace prodmed
