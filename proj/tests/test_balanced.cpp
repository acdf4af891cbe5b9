#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "prodmed/balanced.hpp"
#include "prodmed/error.hpp"
#include "prodmed/generators.hpp"
#include "prodmed/random.hpp"
#include "prodmed/stats.hpp"
#include "test_support.hpp"

namespace prodmed {
namespace {

using testing::euclidean_geometry;
using testing::euclidean_point;
using testing::Rng;

BalancedConfig quiet(double epsilon = kDefaultEpsilon) {
  BalancedConfig cfg;
  cfg.epsilon = epsilon;
  cfg.compute_sandwich = false;
  return cfg;
}

TEST(BalanceFunction, EqualSquaresBalanceAtOne) {
  EXPECT_DOUBLE_EQ(BalanceFunction({{2.0, 2.0}})(1.0), 0.0);
}

TEST(BalanceFunction, SymmetricPairBalancesAtOne) {
  EXPECT_NEAR(BalanceFunction({{1.0, 2.0}, {2.0, 1.0}})(1.0), 0.0, 1e-15);
}

TEST(BalanceFunction, SingleObservationLinearRoot) {
  // alpha * 1 = (2 - alpha) * 3 gives alpha = 1.5.
  EXPECT_NEAR(BalanceFunction({{1.0, 3.0}})(1.5), 0.0, 1e-15);
}

TEST(BalanceFunction, ValuesInUnitIntervalAndNondecreasing) {
  Rng rng(61);
  for (int t = 0; t < 100; ++t) {
    std::vector<FactorSquares> sq;
    for (int i = 0; i < 20; ++i) sq.push_back({rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)});
    const BalanceFunction h(sq);
    double prev = -2.0;
    for (int k = 0; k < 200; ++k) {
      const double a = 0.05 + 1.9 * k / 199.0;
      const double v = h(a);
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
  }
}

TEST(BalanceFunction, DegenerateObservationsAreSkipped) {
  const BalanceFunction h({{0.0, 0.0}, {1.0, 3.0}});
  EXPECT_EQ(h.degenerate(1.0), 1u);
  EXPECT_NEAR(h(1.5), 0.0, 1e-15);
  EXPECT_THROW((void)BalanceFunction({{0.0, 0.0}})(1.0), NumericalError);
}

TEST(BalanceFunction, DimensionAdjustmentDividesSquares) {
  const BalanceFunction plain({{2.0, 9.0}});
  const BalanceFunction adjusted({{4.0, 27.0}}, FactorDimensions{2, 3});
  for (double a : {0.3, 1.0, 1.7}) EXPECT_NEAR(plain(a), adjusted(a), 1e-15);
}

TEST(BisectAlpha, SingleObservation) {
  const BisectionResult r = bisect_alpha(BalanceFunction({{1.0, 3.0}}));
  EXPECT_EQ(r.status, BracketStatus::root);
  EXPECT_NEAR(r.alpha.value(), 1.5, 1e-6);
}

TEST(BisectAlpha, SymmetricPair) {
  EXPECT_NEAR(bisect_alpha(BalanceFunction({{1.0, 2.0}, {2.0, 1.0}})).alpha.value(), 1.0, 1e-6);
}

TEST(BisectAlpha, BoundarySignals) {
  const BisectionResult low = bisect_alpha(BalanceFunction({{100.0, 1.0}}));
  EXPECT_EQ(low.status, BracketStatus::boundary_low);
  EXPECT_DOUBLE_EQ(low.alpha.value(), 0.05);
  const BisectionResult high = bisect_alpha(BalanceFunction({{1.0, 100.0}}));
  EXPECT_EQ(high.status, BracketStatus::boundary_high);
  EXPECT_DOUBLE_EQ(high.alpha.value(), 1.95);
}

TEST(BisectAlpha, FlatBalanceIsNonUnique) {
  const BalanceFunction h({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_FALSE(h.strictly_monotone());
  const BisectionResult r = bisect_alpha(h);
  EXPECT_EQ(r.status, BracketStatus::non_unique);
  EXPECT_DOUBLE_EQ(r.alpha.value(), 1.0);
}

TEST(BisectAlpha, MatchesGridScanOfSignChange) {
  Rng rng(62);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<FactorSquares> sq;
    for (int i = 0; i < 15; ++i) sq.push_back({rng.uniform(0.01, 5.0), rng.uniform(0.01, 5.0)});
    const BalanceFunction h(sq);
    const BisectionResult r = bisect_alpha(h);
    if (r.status != BracketStatus::root) continue;
    ++checked;
    double scan = std::nan("");
    for (double a = 0.05; a <= 1.95; a += 1e-4) {
      if (h(a) >= 0.0) {
        scan = a;
        break;
      }
    }
    EXPECT_NEAR(r.alpha.value(), scan, 1e-4 + 1e-6);
  }
  EXPECT_GT(checked, 50);
}

TEST(BisectAlpha, EndpointBracketOnPositiveSquares) {
  Rng rng(63);
  for (int t = 0; t < 100; ++t) {
    std::vector<FactorSquares> sq;
    for (int i = 0; i < 10; ++i) sq.push_back({rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)});
    const BalanceFunction h(sq);
    EXPECT_LE(h(1e-9), 0.0);
    EXPECT_GE(h(2.0 - 1e-9), 0.0);
  }
}

TEST(SolveBalanced, ExchangeableSampleBalancesAtOne) {
  Rng rng(64);
  const ProductSample s = testing::exchangeable_sample(rng, 60, 2);
  const BalancedFit fit = solve_balanced(s);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.alpha_bal.value(), 1.0, 1e-6);
  const MedianFit one = product_weiszfeld(ScaleValue(1.0), s);
  EXPECT_LT(product_displacement(fit.location, one.location), 1e-6);
}

TEST(SolveBalanced, ResidualsSmallAtConvergence) {
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto g = generate_exp1(200, 65, r);
    const BalancedFit fit = solve_balanced(g.sample, quiet(1e-6));
    ASSERT_TRUE(fit.converged) << r;
    EXPECT_LE(std::abs(fit.H_residual), 1e-6);
    EXPECT_LE(fit.estimating_residual, 1e-6);
    EXPECT_NEAR(balance_mean(fit.alpha_bal, fit.location, g.sample), fit.H_residual, 1e-12);
  }
}

TEST(SolveBalanced, PlainAlternationReachesSameFixedPoint) {
  const auto g = generate_exp1(200, 66, 0);
  BalancedConfig plain = quiet(1e-6);
  plain.accelerate = false;
  plain.max_outer_iterations = 2000;
  const BalancedFit a = solve_balanced(g.sample, quiet(1e-6));
  const BalancedFit b = solve_balanced(g.sample, plain);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_NEAR(a.alpha_bal.value(), b.alpha_bal.value(), 1e-5);
  EXPECT_LT(product_displacement(a.location, b.location), 1e-5);
  EXPECT_LE(a.outer_iterations, b.outer_iterations);
}

TEST(SolveBalanced, RejectsTinySamples) {
  const ProductSample s(euclidean_geometry(1, 1), {euclidean_point({0}, {0})});
  EXPECT_THROW((void)solve_balanced(s), InputError);
}

TEST(SolveBalanced, MixtureMeanBalancedScale) {
  std::vector<double> alphas;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const BalancedFit fit = solve_balanced(generate_exp1(300, 67, r).sample, quiet(1e-6));
    alphas.push_back(fit.alpha_bal.value());
  }
  EXPECT_NEAR(stats::mean(alphas), 0.4179, 0.1);
}

TEST(SolveBalanced, LocationIsUnitFree) {
  const auto g = generate_exp1(300, 68, 0);
  BalancedConfig cfg = quiet(1e-6);
  cfg.location_tolerance = 1e-10;
  cfg.alpha_step_tolerance = 1e-10;
  const BalancedFit ref = solve_balanced(g.sample, cfg);
  ASSERT_TRUE(ref.converged);
  for (double c : {0.1, 0.25, 0.5, 2.0, 4.0, 10.0}) {
    const BalancedFit fit = solve_balanced(g.sample.with_units(c, 1.0), cfg);
    ASSERT_TRUE(fit.converged) << c;
    EXPECT_LE(product_displacement(ref.location, fit.location), 1e-6) << c;
    // The weight absorbs the unit: alpha c^2 / (2 - alpha) is preserved.
    const double a0 = ref.alpha_bal.value(), a1 = fit.alpha_bal.value();
    EXPECT_NEAR(a1 * c * c / (2 - a1), a0 / (2 - a0), 1e-5 * (a0 / (2 - a0))) << c;
  }
}

TEST(BalancedSandwich, StackedRowsAreBoundedAndCovarianceIsPsd) {
  const auto g = generate_exp1(300, 69, 0);
  const BalancedFit fit = solve_balanced(g.sample, quiet(kDefaultEpsilon));
  const BalancedSandwich sw = balanced_sandwich(fit, g.sample);
  const Eigen::Index d = sw.Xi.cols() - 1;
  const double bound = 1.0 / std::sqrt(kDefaultEpsilon);
  for (Eigen::Index i = 0; i < sw.Xi.rows(); ++i) {
    // Chart coordinates carry the alpha metric, where the score has unit length; the g_1
    // norm is at most that over sqrt(min(alpha, 2 - alpha)).
    const double a = fit.alpha_bal.value();
    const Eigen::VectorXd psi = sw.Xi.row(i).head(d).transpose();
    EXPECT_LE(psi.norm(), 1.0 + 1e-12);
    EXPECT_LE(psi.norm() / std::sqrt(std::min(a, 2 - a)), bound + 1e-9);
    EXPECT_LE(std::abs(sw.Xi(i, d)), 1.0 + 1e-12);
  }
  EXPECT_LT((sw.Xi_cov - sw.Xi_cov.transpose()).norm(), 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sw.Xi_cov).eigenvalues().minCoeff(), -1e-10);
  EXPECT_NEAR(0.5 * (sw.wald_lo + sw.wald_hi), fit.alpha_bal.value(), 1e-12);
  EXPECT_NEAR(sw.wald_hi - sw.wald_lo, 2 * 1.96 * sw.alpha_se, 1e-12);
}

TEST(BalancedSandwich, FitCarriesSandwich) {
  const auto g = generate_exp1(300, 70, 0);
  BalancedConfig cfg;
  cfg.epsilon = 1e-6;
  const BalancedFit fit = solve_balanced(g.sample, cfg);
  ASSERT_TRUE(fit.sandwich_available);
  EXPECT_GT(fit.alpha_se, 0.0);
  EXPECT_EQ(fit.J_hat.rows(), fit.Xi_cov.rows());
  EXPECT_NEAR(fit.wald_hi - fit.alpha_bal.value(), 1.96 * fit.alpha_se, 1e-12);
}

TEST(BalancedSandwich, InfluenceStaysBoundedUnderFarContamination) {
  auto g = generate_exp1(300, 71, 0);
  std::vector<ProductPoint> pts(g.sample.points().begin(), g.sample.points().end());
  pts[0] = euclidean_point({100.0, 0.0}, {0.0, 100.0});
  const ProductSample s(g.sample.geometry(), pts);
  const BalancedFit fit = solve_balanced(s, quiet(1e-6));
  const BalancedSandwich sw = balanced_sandwich(fit, s);
  ASSERT_FALSE(sw.singular);
  const Eigen::MatrixXd inf = sw.J_hat.fullPivLu().solve(sw.Xi.transpose());
  std::vector<double> norms;
  for (Eigen::Index i = 0; i < inf.cols(); ++i) norms.push_back(inf.col(i).norm());
  EXPECT_TRUE(std::all_of(norms.begin(), norms.end(), [](double v) { return std::isfinite(v); }));
  EXPECT_LT(*std::max_element(norms.begin(), norms.end()), 10.0 * stats::median(norms));
}

TEST(BalancedSandwich, AgreesWithBootstrapSpread) {
  const auto g = generate_exp1(500, 72, 0);
  BalancedConfig cfg;
  cfg.epsilon = 1e-6;
  const BalancedFit fit = solve_balanced(g.sample, cfg);
  ASSERT_TRUE(fit.sandwich_available);
  constexpr int kB = 300;
  RandomStream rs(72, StreamPurpose::bootstrap, 0);
  std::vector<std::size_t> idx(g.sample.size());
  BalancedConfig boot_cfg = quiet(1e-6);
  boot_cfg.init = fit.location;
  boot_cfg.initial_alpha = fit.alpha_bal.value();
  std::vector<double> alphas;
  for (int b = 0; b < kB; ++b) {
    for (auto& i : idx) i = rs.uniform_index(g.sample.size());
    alphas.push_back(solve_balanced(g.sample.subset(idx), boot_cfg).alpha_bal.value());
  }
  const double ratio = fit.alpha_se / stats::sample_sd(alphas);
  EXPECT_GE(ratio, 0.6);
  EXPECT_LE(ratio, 1.5);
}

}  // namespace
}  // namespace prodmed
