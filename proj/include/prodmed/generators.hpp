#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "prodmed/product.hpp"
#include "prodmed/random.hpp"

namespace prodmed {

struct GeneratedSample {
  ProductSample sample;
  /// Mixture component of each observation (0 = central); -1 marks a contaminated row.
  std::vector<int> component;
};

/// Three-component Euclidean mixture on R^2 x R^2: a central component, one shifted in
/// the M factor and one shifted in the N factor, each with isotropic Gaussian noise.
struct Exp1Design {
  std::array<double, 3> weights{0.45, 0.30, 0.25};
  Eigen::Vector2d m_shift{4.0, 0.0};
  Eigen::Vector2d n_shift{3.0, 0.0};
  double noise_sd = 0.1;

  void validate() const;
};

/// Draws from stream (seed, data, index): per observation one uniform for the component,
/// then two normals for X and two for Y.
[[nodiscard]] GeneratedSample generate_exp1(std::size_t n, std::uint64_t seed,
                                            std::uint64_t index = 0, const Exp1Design& design = {});

struct ContaminationDesign {
  double eta = 0.0;
  Eigen::Vector2d outlier_center{20.0, 0.0};
  double outlier_sd = 1.0;
};

/// generate_exp1 with the first floor(eta n) M-observations replaced by
/// outlier_center + outlier_sd N(0, I); outlier noise comes from stream (seed, outliers, index).
[[nodiscard]] GeneratedSample generate_exp2_contaminated(std::size_t n, const ContaminationDesign& contamination,
                                                         std::uint64_t seed, std::uint64_t index = 0,
                                                         const Exp1Design& design = {});

/// Gaussian laws N(mu, Sigma) represented on R^d x SPD(d): central (0, I), mean-shifted
/// (delta e_1, I) and covariance-shifted (0, AR(rho)) components. Means receive
/// mean_noise N(0, I); covariances become C (I + cov_noise W) C with C the symmetric root
/// of the base matrix and W symmetric with independent N(0,1) upper entries, then
/// eigenvalues are clamped at 1e-8.
struct Exp4Design {
  std::array<double, 3> weights{0.50, 0.25, 0.25};
  double delta = 3.0;
  double rho = 0.7;
  double mean_noise = 0.1;
  double cov_noise = 0.07;

  void validate() const;
};

[[nodiscard]] GeneratedSample generate_exp4_gaussians(std::size_t n, int d, std::uint64_t seed,
                                                      std::uint64_t index = 0,
                                                      const Exp4Design& design = {});

/// Component index for a uniform draw under the given weights.
[[nodiscard]] int pick_component(double u, const std::array<double, 3>& weights);

}  // namespace prodmed
