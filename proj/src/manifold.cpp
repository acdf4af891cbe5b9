#include "prodmed/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prodmed/error.hpp"

namespace prodmed {

namespace {

void require_same(const FactorPoint& a, const FactorPoint& b) {
  if (a.kind() != b.kind()) throw GeometryError("factor points of different geometry kinds");
  if (a.dimension() != b.dimension()) {
    throw GeometryError("factor dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                        std::to_string(b.dimension()));
  }
}

void require_anchored(const FactorPoint& base, const TangentVector& v) {
  if (base.kind() != v.kind() || base.matrix().rows() != v.matrix().rows() ||
      base.matrix().cols() != v.matrix().cols()) {
    throw GeometryError("tangent vector is not anchored at a compatible base point");
  }
}

}  // namespace

std::string_view to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::euclidean:
      return "euclidean";
    case GeometryKind::bures_wasserstein:
      return "spd";
  }
  return "unknown";
}

FactorPoint FactorPoint::euclidean(Eigen::VectorXd x) {
  if (x.size() == 0) throw GeometryError("empty Euclidean point");
  if (!x.allFinite()) throw GeometryError("Euclidean point has non-finite entries");
  return FactorPoint(GeometryKind::euclidean, Eigen::MatrixXd(std::move(x)));
}

FactorPoint FactorPoint::spd(Eigen::MatrixXd sigma) {
  if (!spd::is_spd(sigma)) {
    throw GeometryError("matrix is not symmetric positive definite");
  }
  return FactorPoint(GeometryKind::bures_wasserstein, spd::symmetrize(sigma));
}

TangentVector TangentVector::euclidean(Eigen::VectorXd v) {
  return TangentVector(GeometryKind::euclidean, Eigen::MatrixXd(std::move(v)));
}

TangentVector TangentVector::symmetric(Eigen::MatrixXd v) {
  if (v.rows() != v.cols()) throw GeometryError("BW tangent must be square");
  if (spd::max_asymmetry(v) > spd::kSymmetryTolerance * std::max(1.0, v.cwiseAbs().maxCoeff())) {
    throw GeometryError("BW tangent must be symmetric");
  }
  return TangentVector(GeometryKind::bures_wasserstein, spd::symmetrize(v));
}

TangentVector TangentVector::zero_at(const FactorPoint& base) {
  return TangentVector(base.kind(),
                       Eigen::MatrixXd::Zero(base.matrix().rows(), base.matrix().cols()));
}

TangentVector& TangentVector::operator+=(const TangentVector& other) {
  if (kind_ != other.kind_ || data_.rows() != other.data_.rows() ||
      data_.cols() != other.data_.cols()) {
    throw GeometryError("adding incompatible tangent vectors");
  }
  data_ += other.data_;
  return *this;
}

TangentVector& TangentVector::axpy(double w, const TangentVector& x) {
  if (kind_ != x.kind_ || data_.rows() != x.data_.rows() || data_.cols() != x.data_.cols()) {
    throw GeometryError("adding incompatible tangent vectors");
  }
  data_.noalias() += w * x.data_;
  return *this;
}

TangentVector& TangentVector::operator*=(double s) {
  data_ *= s;
  return *this;
}

int ManifoldDescriptor::intrinsic_dimension() const noexcept {
  return kind == GeometryKind::euclidean ? dimension : dimension * (dimension + 1) / 2;
}

void ManifoldDescriptor::check(const FactorPoint& x) const {
  if (x.kind() != kind) {
    throw GeometryError("expected a " + std::string(to_string(kind)) + " factor point, got " +
                        std::string(to_string(x.kind())));
  }
  if (x.dimension() != dimension) {
    throw GeometryError("factor dimension mismatch: expected " + std::to_string(dimension) +
                        ", got " + std::to_string(x.dimension()));
  }
}

// ---------------------------------------------------------------------------

FactorBase::FactorBase(const FactorPoint& base) : base_(base) {
  if (base_.kind() == GeometryKind::bures_wasserstein) {
    root_.emplace(base_.matrix());
    if (root_->min_eigenvalue < spd::kMinEigenvalue) {
      throw NumericalError("singular BW base matrix");
    }
  }
}

int FactorBase::intrinsic_dimension() const noexcept {
  const auto d = static_cast<int>(base_.dimension());
  return kind() == GeometryKind::euclidean ? d : d * (d + 1) / 2;
}

FactorBase::LogResult FactorBase::log(const FactorPoint& target) const {
  require_same(base_, target);
  if (kind() == GeometryKind::euclidean) {
    Eigen::VectorXd diff = target.matrix().col(0) - base_.matrix().col(0);
    const double sq = diff.squaredNorm();
    return {TangentVector::euclidean(std::move(diff)), sq};
  }
  const auto& r = *root_;
  const Eigen::MatrixXd& sigma = base_.matrix();
  const Eigen::MatrixXd middle = spd::symmetrize(r.sqrt * target.matrix() * r.sqrt);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(middle);
  if (solver.info() != Eigen::Success) throw NumericalError("BW log: eigendecomposition failed");
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd middle_root =
      spd::symmetrize(solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose());
  const Eigen::Index d = sigma.rows();
  const Eigen::MatrixXd lift =
      spd::symmetrize(r.inv_sqrt * middle_root * r.inv_sqrt) - Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd v = spd::symmetrize(lift * sigma + sigma * lift);
  const double sq =
      std::max(0.0, sigma.trace() + target.matrix().trace() - 2.0 * roots.sum());
  return {TangentVector(GeometryKind::bures_wasserstein, std::move(v)), sq};
}

double FactorBase::squared_distance(const FactorPoint& target) const {
  require_same(base_, target);
  if (kind() == GeometryKind::euclidean) {
    return (target.matrix().col(0) - base_.matrix().col(0)).squaredNorm();
  }
  const auto& r = *root_;
  const double root_trace = spd::trace_sqrtm(r.sqrt * target.matrix() * r.sqrt);
  return std::max(0.0, base_.matrix().trace() + target.matrix().trace() - 2.0 * root_trace);
}

std::optional<FactorPoint> FactorBase::exp(const TangentVector& v) const {
  require_anchored(base_, v);
  if (kind() == GeometryKind::euclidean) {
    return FactorPoint(GeometryKind::euclidean, base_.matrix() + v.matrix());
  }
  const Eigen::Index d = base_.dimension();
  const Eigen::MatrixXd lift = spd::solve_lyapunov(*root_, v.matrix());
  const Eigen::MatrixXd factor = Eigen::MatrixXd::Identity(d, d) + lift;
  if (factor.llt().info() != Eigen::Success) return std::nullopt;
  Eigen::MatrixXd out = spd::symmetrize(factor * base_.matrix() * factor);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(out, Eigen::EigenvaluesOnly);
  if (check.info() != Eigen::Success || !(check.eigenvalues().minCoeff() > spd::kMinEigenvalue)) {
    return std::nullopt;
  }
  return FactorPoint(GeometryKind::bures_wasserstein, std::move(out));
}

double FactorBase::inner(const TangentVector& a, const TangentVector& b) const {
  require_anchored(base_, a);
  require_anchored(base_, b);
  if (kind() == GeometryKind::euclidean) return a.matrix().col(0).dot(b.matrix().col(0));
  const Eigen::MatrixXd la = spd::solve_lyapunov(*root_, a.matrix());
  const Eigen::MatrixXd lb = spd::solve_lyapunov(*root_, b.matrix());
  return (la * base_.matrix() * lb).trace();
}

double FactorBase::norm(const TangentVector& v) const {
  if (kind() == GeometryKind::euclidean) {
    require_anchored(base_, v);
    return v.matrix().col(0).norm();
  }
  return coordinates(v).norm();
}

Eigen::VectorXd FactorBase::coordinates(const TangentVector& v) const {
  require_anchored(base_, v);
  if (kind() == GeometryKind::euclidean) return v.matrix().col(0);
  const auto& r = *root_;
  const Eigen::Index d = base_.dimension();
  const Eigen::MatrixXd rotated = r.eigenvectors.transpose() * v.matrix() * r.eigenvectors;
  Eigen::VectorXd c(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    c(k++) = rotated(i, i) / (2.0 * std::sqrt(std::max(r.eigenvalues(i), spd::kEigenvalueClamp)));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double lam = std::max(r.eigenvalues(i), spd::kEigenvalueClamp) +
                         std::max(r.eigenvalues(j), spd::kEigenvalueClamp);
      c(k++) = 0.5 * (rotated(i, j) + rotated(j, i)) / std::sqrt(lam);
    }
  }
  return c;
}

TangentVector FactorBase::from_coordinates(const Eigen::VectorXd& c) const {
  if (c.size() != intrinsic_dimension()) throw GeometryError("coordinate vector has wrong size");
  if (kind() == GeometryKind::euclidean) return TangentVector::euclidean(c);
  const auto& r = *root_;
  const Eigen::Index d = base_.dimension();
  Eigen::MatrixXd rotated(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    rotated(i, i) = 2.0 * std::sqrt(std::max(r.eigenvalues(i), spd::kEigenvalueClamp)) * c(k++);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double lam = std::max(r.eigenvalues(i), spd::kEigenvalueClamp) +
                         std::max(r.eigenvalues(j), spd::kEigenvalueClamp);
      rotated(i, j) = rotated(j, i) = c(k++) * std::sqrt(lam);
    }
  }
  return TangentVector(GeometryKind::bures_wasserstein,
                       spd::symmetrize(r.eigenvectors * rotated * r.eigenvectors.transpose()));
}

// ---------------------------------------------------------------------------

double factor_distance(const FactorPoint& a, const FactorPoint& b) {
  require_same(a, b);
  if (a.kind() == GeometryKind::euclidean) {
    return (a.matrix().col(0) - b.matrix().col(0)).norm();
  }
  // tr{S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}}
  const Eigen::MatrixXd root2 = spd::sqrtm(b.matrix());
  const double cross = spd::trace_sqrtm(root2 * a.matrix() * root2);
  const double total = a.matrix().trace() + b.matrix().trace();
  const double sq = total - 2.0 * cross;
  // The trace formula cancels catastrophically for nearby matrices; the log norm does not.
  if (sq < 1e-6 * total) {
    const FactorBase base(a);
    return base.norm(base.log(b).log);
  }
  return std::sqrt(sq);
}

TangentVector log_map(const FactorPoint& base, const FactorPoint& target) {
  return FactorBase(base).log(target).log;
}

FactorPoint exp_map(const FactorPoint& base, const TangentVector& v) {
  auto out = FactorBase(base).exp(v);
  if (!out) throw GeometryError("BW exponential left the SPD cone");
  return *std::move(out);
}

std::optional<FactorPoint> try_exp_map(const FactorPoint& base, const TangentVector& v) {
  return FactorBase(base).exp(v);
}

double tangent_norm(const FactorPoint& base, const TangentVector& v) {
  return FactorBase(base).norm(v);
}

double tangent_inner(const FactorPoint& base, const TangentVector& a, const TangentVector& b) {
  return FactorBase(base).inner(a, b);
}

}  // namespace prodmed
