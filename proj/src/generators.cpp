#include "prodmed/generators.hpp"

#include <cmath>

#include "prodmed/error.hpp"
#include "prodmed/spd.hpp"

namespace prodmed {
namespace {

void validate_weights(const std::array<double, 3>& w) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw InputError("mixture weights must be nonnegative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("mixture weights must sum to 1");
}

}  // namespace

void Exp1Design::validate() const {
  validate_weights(weights);
  if (!(noise_sd >= 0.0)) throw InputError("noise standard deviation must be nonnegative");
}

void Exp4Design::validate() const {
  validate_weights(weights);
  if (!(mean_noise >= 0.0) || !(cov_noise >= 0.0)) throw InputError("perturbation sizes must be nonnegative");
  if (!(std::abs(rho) < 1.0)) throw InputError("AR coefficient must lie in (-1,1)");
}

int pick_component(double u, const std::array<double, 3>& weights) {
  if (u < weights[0]) return 0;
  if (u < weights[0] + weights[1]) return 1;
  return 2;
}

GeneratedSample generate_exp1(std::size_t n, std::uint64_t seed, std::uint64_t index,
                              const Exp1Design& design) {
  design.validate();
  RandomStream rng(seed, StreamPurpose::data, index);
  std::vector<ProductPoint> pts;
  std::vector<int> comp;
  pts.reserve(n);
  comp.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick_component(rng.uniform(), design.weights);
    Eigen::VectorXd x = design.noise_sd * rng.normal_vector(2);
    Eigen::VectorXd y = design.noise_sd * rng.normal_vector(2);
    if (c == 1) x += design.m_shift;
    if (c == 2) y += design.n_shift;
    pts.push_back({FactorPoint::euclidean(std::move(x)), FactorPoint::euclidean(std::move(y))});
    comp.push_back(c);
  }
  return {ProductSample({ManifoldDescriptor::euclidean(2), ManifoldDescriptor::euclidean(2)}, std::move(pts)),
          std::move(comp)};
}

GeneratedSample generate_exp2_contaminated(std::size_t n, const ContaminationDesign& contamination,
                                           std::uint64_t seed, std::uint64_t index,
                                           const Exp1Design& design) {
  if (!(contamination.eta >= 0.0 && contamination.eta <= 0.5)) {
    throw InputError("contamination fraction must lie in [0, 0.5]");
  }
  GeneratedSample base = generate_exp1(n, seed, index, design);
  const auto k = static_cast<std::size_t>(std::floor(contamination.eta * static_cast<double>(n) + 1e-9));
  if (k == 0) return base;
  RandomStream rng(seed, StreamPurpose::outliers, index);
  std::vector<ProductPoint> pts(base.sample.points().begin(), base.sample.points().end());
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd x = contamination.outlier_center + contamination.outlier_sd * rng.normal_vector(2);
    pts[i].p = FactorPoint::euclidean(std::move(x));
    base.component[i] = -1;
  }
  return {ProductSample(base.sample.geometry(), std::move(pts)), std::move(base.component)};
}

GeneratedSample generate_exp4_gaussians(std::size_t n, int d, std::uint64_t seed, std::uint64_t index,
                                        const Exp4Design& design) {
  design.validate();
  if (d < 2) throw InputError("Gaussian experiment needs dimension at least 2");
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd ar = spd::ar1_matrix(d, design.rho);
  const Eigen::MatrixXd ar_root = spd::sqrtm(ar);
  RandomStream rng(seed, StreamPurpose::data, index);
  std::vector<ProductPoint> pts;
  std::vector<int> comp;
  pts.reserve(n);
  comp.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick_component(rng.uniform(), design.weights);
    Eigen::VectorXd mu = design.mean_noise * rng.normal_vector(d);
    if (c == 1) mu(0) += design.delta;
    Eigen::MatrixXd w(d, d);
    for (int r = 0; r < d; ++r) {
      for (int s = r; s < d; ++s) w(r, s) = w(s, r) = rng.normal();
    }
    const Eigen::MatrixXd& root = c == 2 ? ar_root : identity;
    Eigen::MatrixXd sigma = spd::symmetrize(root * (identity + design.cov_noise * w) * root);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-8);
    sigma = spd::symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
    pts.push_back({FactorPoint::euclidean(std::move(mu)), FactorPoint::spd(std::move(sigma))});
    comp.push_back(c);
  }
  return {ProductSample({ManifoldDescriptor::euclidean(d), ManifoldDescriptor::bures_wasserstein(d)},
                        std::move(pts)),
          std::move(comp)};
}

}  // namespace prodmed
