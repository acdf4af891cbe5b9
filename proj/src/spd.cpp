#include "prodmed/spd.hpp"

#include <algorithm>
#include <cmath>

#include "prodmed/error.hpp"

namespace prodmed::spd {

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(a));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed");
  }
  return solver;
}

}  // namespace

SpectralRoot::SpectralRoot(const Eigen::MatrixXd& sigma) {
  auto solver = decompose(sigma);
  eigenvalues = solver.eigenvalues();
  eigenvectors = solver.eigenvectors();
  min_eigenvalue = eigenvalues.minCoeff();
  const Eigen::VectorXd clamped = eigenvalues.cwiseMax(kEigenvalueClamp);
  const Eigen::VectorXd root = clamped.cwiseSqrt();
  sqrt = symmetrize(eigenvectors * root.asDiagonal() * eigenvectors.transpose());
  inv_sqrt =
      symmetrize(eigenvectors * root.cwiseInverse().asDiagonal() * eigenvectors.transpose());
}

Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& a) {
  auto solver = decompose(a);
  const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(kEigenvalueClamp).cwiseSqrt();
  return symmetrize(solver.eigenvectors() * root.asDiagonal() *
                    solver.eigenvectors().transpose());
}

Eigen::MatrixXd inv_sqrtm(const Eigen::MatrixXd& a) {
  auto solver = decompose(a);
  const Eigen::VectorXd root =
      solver.eigenvalues().cwiseMax(kEigenvalueClamp).cwiseSqrt().cwiseInverse();
  return symmetrize(solver.eigenvectors() * root.asDiagonal() *
                    solver.eigenvectors().transpose());
}

double trace_sqrtm(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(a), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed");
  }
  return solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

double max_asymmetry(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return INFINITY;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

bool is_spd(const Eigen::MatrixXd& a, double min_eigenvalue) {
  if (a.rows() == 0 || a.rows() != a.cols() || !a.allFinite()) return false;
  if (max_asymmetry(a) > kSymmetryTolerance) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(a), Eigen::EigenvaluesOnly);
  return solver.info() == Eigen::Success && solver.eigenvalues().minCoeff() > min_eigenvalue;
}

Eigen::MatrixXd solve_lyapunov(const SpectralRoot& s, const Eigen::MatrixXd& v) {
  const auto& u = s.eigenvectors;
  Eigen::MatrixXd rotated = u.transpose() * v * u;
  const Eigen::Index d = rotated.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      rotated(i, j) /= std::max(s.eigenvalues(i), kEigenvalueClamp) +
                       std::max(s.eigenvalues(j), kEigenvalueClamp);
    }
  }
  return symmetrize(u * rotated * u.transpose());
}

Eigen::MatrixXd ar1_matrix(int d, double rho) {
  Eigen::MatrixXd out(d, d);
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) out(j, k) = std::pow(rho, std::abs(j - k));
  }
  return out;
}

}  // namespace prodmed::spd
