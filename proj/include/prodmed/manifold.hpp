#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string_view>

#include "prodmed/spd.hpp"

namespace prodmed {

enum class GeometryKind { euclidean, bures_wasserstein };

[[nodiscard]] std::string_view to_string(GeometryKind kind);

/// A point of a factor manifold: a vector in R^d or an SPD matrix under the
/// Bures-Wasserstein metric. Euclidean points are stored as d x 1 matrices.
class FactorPoint {
 public:
  [[nodiscard]] static FactorPoint euclidean(Eigen::VectorXd x);
  /// Throws GeometryError unless `sigma` is symmetric (1e-10) with eigenvalues > 1e-12.
  [[nodiscard]] static FactorPoint spd(Eigen::MatrixXd sigma);

  [[nodiscard]] GeometryKind kind() const noexcept { return kind_; }
  /// Vector length (Euclidean) or matrix side (BW).
  [[nodiscard]] Eigen::Index dimension() const noexcept { return data_.rows(); }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return data_; }
  [[nodiscard]] Eigen::VectorXd vector() const { return data_.col(0); }

 private:
  FactorPoint(GeometryKind kind, Eigen::MatrixXd data) : kind_(kind), data_(std::move(data)) {}
  friend class FactorBase;

  GeometryKind kind_;
  Eigen::MatrixXd data_;
};

/// Tangent vector: a vector (Euclidean) or a symmetric matrix (BW). The anchoring
/// base point is not stored; callers keep track of it.
class TangentVector {
 public:
  [[nodiscard]] static TangentVector euclidean(Eigen::VectorXd v);
  [[nodiscard]] static TangentVector symmetric(Eigen::MatrixXd v);
  [[nodiscard]] static TangentVector zero_at(const FactorPoint& base);

  [[nodiscard]] GeometryKind kind() const noexcept { return kind_; }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return data_; }
  [[nodiscard]] Eigen::VectorXd vector() const { return data_.col(0); }

  TangentVector& operator+=(const TangentVector& other);
  TangentVector& operator*=(double s);
  /// this += w * x without temporaries.
  TangentVector& axpy(double w, const TangentVector& x);
  friend TangentVector operator*(double s, TangentVector v) { return v *= s; }
  friend TangentVector operator+(TangentVector a, const TangentVector& b) { return a += b; }
  friend TangentVector operator-(TangentVector a, const TangentVector& b) { return a += -1.0 * b; }

 private:
  TangentVector(GeometryKind kind, Eigen::MatrixXd data) : kind_(kind), data_(std::move(data)) {}
  friend class FactorBase;

  GeometryKind kind_;
  Eigen::MatrixXd data_;
};

/// Geometry kind and dimensions of one factor. `metric_scale` multiplies all factor
/// distances (a change of units); logarithms and exponentials are unaffected by it.
struct ManifoldDescriptor {
  GeometryKind kind = GeometryKind::euclidean;
  int dimension = 1;
  double metric_scale = 1.0;

  [[nodiscard]] static ManifoldDescriptor euclidean(int d) {
    return {GeometryKind::euclidean, d, 1.0};
  }
  [[nodiscard]] static ManifoldDescriptor bures_wasserstein(int d) {
    return {GeometryKind::bures_wasserstein, d, 1.0};
  }

  /// d for R^d, d(d+1)/2 for SPD(d).
  [[nodiscard]] int intrinsic_dimension() const noexcept;
  /// Throws GeometryError if `x` does not belong to this factor.
  void check(const FactorPoint& x) const;

  friend bool operator==(const ManifoldDescriptor&, const ManifoldDescriptor&) = default;
};

[[nodiscard]] double factor_distance(const FactorPoint& a, const FactorPoint& b);
[[nodiscard]] TangentVector log_map(const FactorPoint& base, const FactorPoint& target);
/// Throws GeometryError when the BW exponential leaves the SPD cone.
[[nodiscard]] FactorPoint exp_map(const FactorPoint& base, const TangentVector& v);
/// Same as exp_map but returns nullopt instead of throwing on a cone exit.
[[nodiscard]] std::optional<FactorPoint> try_exp_map(const FactorPoint& base,
                                                     const TangentVector& v);
[[nodiscard]] double tangent_norm(const FactorPoint& base, const TangentVector& v);
[[nodiscard]] double tangent_inner(const FactorPoint& base, const TangentVector& a,
                                   const TangentVector& b);

/// A factor point with its spectral data cached, for repeated logarithms, norms and
/// coordinate conversions at the same base.
///
/// BW conventions: with transport map T = S^{-1/2}(S^{1/2} X S^{1/2})^{1/2} S^{-1/2},
/// log_S(X) = (T - I) S + S (T - I); exp_S(V) = (I + L) S (I + L) where L S + S L = V;
/// <U, V>_S = tr(L_U S L_V). Coordinates are orthonormal for this inner product and are
/// expressed in the eigenbasis of S (diagonal entries first, then the strict upper
/// triangle row by row).
class FactorBase {
 public:
  explicit FactorBase(const FactorPoint& base);

  struct LogResult {
    TangentVector log;
    double squared_distance;
  };

  [[nodiscard]] const FactorPoint& point() const noexcept { return base_; }
  [[nodiscard]] GeometryKind kind() const noexcept { return base_.kind(); }
  [[nodiscard]] int intrinsic_dimension() const noexcept;

  [[nodiscard]] LogResult log(const FactorPoint& target) const;
  [[nodiscard]] double squared_distance(const FactorPoint& target) const;
  [[nodiscard]] std::optional<FactorPoint> exp(const TangentVector& v) const;
  [[nodiscard]] double inner(const TangentVector& a, const TangentVector& b) const;
  [[nodiscard]] double norm(const TangentVector& v) const;

  [[nodiscard]] Eigen::VectorXd coordinates(const TangentVector& v) const;
  [[nodiscard]] TangentVector from_coordinates(const Eigen::VectorXd& c) const;

 private:
  FactorPoint base_;
  std::optional<spd::SpectralRoot> root_;
};

}  // namespace prodmed
