#pragma once

#include <Eigen/Dense>

namespace prodmed::spd {

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kMinEigenvalue = 1e-12;
inline constexpr double kEigenvalueClamp = 1e-14;

/// (A + A^T) / 2
[[nodiscard]] inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

/// Spectral data of a symmetric positive-definite matrix, with its square root and
/// inverse square root precomputed. Eigenvalues below 1e-14 are clamped.
struct SpectralRoot {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;
  double min_eigenvalue = 0.0;

  explicit SpectralRoot(const Eigen::MatrixXd& sigma);
};

[[nodiscard]] Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& a);
[[nodiscard]] Eigen::MatrixXd inv_sqrtm(const Eigen::MatrixXd& a);

/// Trace of the principal square root of a symmetric PSD matrix.
[[nodiscard]] double trace_sqrtm(const Eigen::MatrixXd& a);

[[nodiscard]] double max_asymmetry(const Eigen::MatrixXd& a);

/// True when `a` is square, symmetric within 1e-10 and its smallest eigenvalue exceeds
/// `min_eigenvalue`.
[[nodiscard]] bool is_spd(const Eigen::MatrixXd& a, double min_eigenvalue = kMinEigenvalue);

/// Solves L*S + S*L = V for symmetric L, given the spectral data of S.
[[nodiscard]] Eigen::MatrixXd solve_lyapunov(const SpectralRoot& s, const Eigen::MatrixXd& v);

/// Toeplitz matrix with entries rho^|j-k|.
[[nodiscard]] Eigen::MatrixXd ar1_matrix(int d, double rho);

}  // namespace prodmed::spd
