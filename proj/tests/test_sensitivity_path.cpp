#include <gtest/gtest.h>

#include <cmath>

#include "prodmed/error.hpp"
#include "prodmed/generators.hpp"
#include "prodmed/sensitivity_path.hpp"
#include "test_support.hpp"

namespace prodmed {
namespace {

using testing::euclidean_geometry;
using testing::euclidean_point;
using testing::Rng;

const std::vector<double> kGrid = make_grid(0.05, 1.95, 39);

TEST(MakeGrid, EndpointsAndSpacing) {
  const auto g = make_grid(0.05, 1.95, 39);
  ASSERT_EQ(g.size(), 39u);
  EXPECT_DOUBLE_EQ(g.front(), 0.05);
  EXPECT_DOUBLE_EQ(g.back(), 1.95);
  EXPECT_NEAR(g[19], 1.0, 1e-15);
  EXPECT_NEAR(g[1] - g[0], 0.05, 1e-15);
}

TEST(SolvePath, RejectsBadGrids) {
  Rng rng(41);
  const ProductSample s = testing::exchangeable_sample(rng, 10, 2);
  const std::vector<double> unsorted{0.5, 0.4};
  const std::vector<double> outside{0.01, 1.0};
  EXPECT_THROW((void)solve_path(s, unsorted), InputError);
  EXPECT_THROW((void)solve_path(s, outside), InputError);
}

TEST(SolvePath, SwapSymmetricSampleMirrorsDisplacements) {
  Rng rng(42);
  const ProductSample s = testing::swap_symmetric_sample(rng, 40, 2);
  const PathResult path = solve_path(s, kGrid);
  ASSERT_EQ(path.unconverged, 0u);
  for (std::size_t k = 0; k < kGrid.size(); ++k) {
    EXPECT_NEAR(path.displacement_m[k], path.displacement_n[kGrid.size() - 1 - k], 1e-6);
  }
}

TEST(SolvePath, SingleObservationIsConstant) {
  const auto z = euclidean_point({1, 2}, {3, 4});
  const ProductSample s(euclidean_geometry(2, 2), {z});
  const PathResult path = solve_path(s, kGrid);
  for (std::size_t k = 0; k < kGrid.size(); ++k) {
    EXPECT_EQ(path.profiled[k], 0.0);
    EXPECT_EQ(path.displacement_m[k], 0.0);
    EXPECT_EQ(path.displacement_n[k], 0.0);
  }
}

TEST(SolvePath, MixtureProfileMinimizedAtAnEndpoint) {
  const auto g = generate_exp1(300, 99, 0);
  PathConfig cfg;
  cfg.compute_sensitivity = false;
  const PathResult path = solve_path(g.sample, kGrid, kDefaultEpsilon, cfg);
  const std::size_t k = path.argmin();
  EXPECT_TRUE(k == 0 || k + 1 == kGrid.size());
}

TEST(SolvePath, ProfileMinimumIsAnEndpointOnRandomFixtures) {
  Rng rng(43);
  PathConfig cfg;
  cfg.compute_sensitivity = false;
  for (int t = 0; t < 10; ++t) {
    std::vector<ProductPoint> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(euclidean_point(rng.vector(2, 1.0 + t), rng.vector(2)));
    const PathResult path = solve_path(ProductSample(euclidean_geometry(2, 2), pts), kGrid, kDefaultEpsilon, cfg);
    const double endpoint = std::min(path.profiled.front(), path.profiled.back());
    for (double v : path.profiled) EXPECT_GE(v, endpoint - 1e-6);
  }
}

TEST(SolvePath, WarmStartDirectionDoesNotMatter) {
  const auto g = generate_exp1(200, 7, 3);
  PathConfig fwd;
  fwd.compute_sensitivity = false;
  PathConfig rev = fwd;
  rev.reverse = true;
  const PathResult a = solve_path(g.sample, kGrid, kDefaultEpsilon, fwd);
  const PathResult b = solve_path(g.sample, kGrid, kDefaultEpsilon, rev);
  for (std::size_t k = 0; k < kGrid.size(); ++k) {
    EXPECT_LT(product_displacement(a.fits[k].location, b.fits[k].location), 1e-6);
  }
}

TEST(PathDerivative, ExchangeableFactorsHaveNoDriftAtOne) {
  Rng rng(44);
  const ProductSample s = testing::exchangeable_sample(rng, 60, 2);
  const MedianFit fit = product_weiszfeld(ScaleValue(1.0), s);
  const PathDerivative d = path_derivative(ScaleValue(1.0), fit.location, s);
  EXPECT_LT(d.B_hat.norm(), 1e-8);
  EXPECT_LT(d.S, 1e-6);
}

TEST(PathDerivative, ImplicitFormulaMatchesFiniteDifferences) {
  const auto g = generate_exp1(1000, 11, 0);
  for (double a : {0.5, 1.0, 1.5}) {
    const ScaleValue alpha(a);
    const MedianFit fit = product_weiszfeld(alpha, g.sample);
    const PathDerivative imp = path_derivative(alpha, fit.location, g.sample);
    const PathDerivative fd = finite_difference_derivative(alpha, fit.location, g.sample);
    EXPECT_LT((imp.coordinates - fd.coordinates).norm() / fd.coordinates.norm(), 0.1) << "alpha " << a;
    EXPECT_LT(std::abs(imp.S - fd.S) / fd.S, 0.1) << "alpha " << a;
  }
}

TEST(PathDerivative, SignMatchesFiniteDifferencesOnOneSidedFixture) {
  // Heavy M cluster at the origin, light cluster at (5, 0); N data are noise around 0.
  Rng rng(45);
  std::vector<ProductPoint> pts;
  for (int i = 0; i < 400; ++i) {
    const bool heavy = i % 5 < 3;
    Eigen::VectorXd x = 0.3 * rng.vector(2);
    if (!heavy) x(0) += 5.0;
    pts.push_back(euclidean_point(x, rng.vector(2, heavy ? 2.0 : 0.2)));
  }
  const ProductSample s(euclidean_geometry(2, 2), pts);
  for (double a : {0.4, 1.0, 1.6}) {
    const ScaleValue alpha(a);
    const MedianFit fit = product_weiszfeld(alpha, s);
    const PathDerivative imp = path_derivative(alpha, fit.location, s);
    const PathDerivative fd = finite_difference_derivative(alpha, fit.location, s);
    const double mi = imp.coordinates(0), mf = fd.coordinates(0);
    ASSERT_GT(std::abs(mf), 1e-6);
    EXPECT_EQ(std::signbit(mi), std::signbit(mf)) << "alpha " << a;
    // Increasing alpha pulls the M location towards the heavy cluster at the origin.
    EXPECT_LT(mi * fit.location.p.vector()(0), 0.0) << "alpha " << a;
  }
}

TEST(SolvePath, SensitivityColumnsUndefinedAtEndpoints) {
  const auto g = generate_exp1(100, 3, 0);
  const PathResult path = solve_path(g.sample, kGrid);
  EXPECT_TRUE(std::isnan(path.sensitivity.front()));
  EXPECT_TRUE(std::isnan(path.sensitivity.back()));
  for (std::size_t k = 1; k + 1 < kGrid.size(); ++k) EXPECT_GE(path.sensitivity[k], 0.0);
}

PathSummary m_displacement_from(const FactorPoint& ref) {
  return [ref](const ProductPoint& m) { return factor_distance(m.p, ref); };
}

TEST(BootstrapBands, PointMassGivesZeroWidth) {
  const auto z = euclidean_point({1, 2}, {3, 4});
  const ProductSample s(euclidean_geometry(2, 2), std::vector<ProductPoint>(20, z));
  BandConfig cfg;
  cfg.replications = 50;
  const auto grid = make_grid(0.05, 1.95, 5);
  const PathBands b = bootstrap_bands(s, grid, m_displacement_from(z.p), cfg);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(b.upper[k] - b.lower[k], 0.0);
}

TEST(BootstrapBands, RequiresFiftyReplications) {
  const auto g = generate_exp1(30, 1, 0);
  BandConfig cfg;
  cfg.replications = 49;
  EXPECT_THROW((void)bootstrap_bands(g.sample, make_grid(0.05, 1.95, 3), m_displacement_from(g.sample[0].p), cfg),
               InputError);
}

TEST(BootstrapBands, IdenticalAcrossRunsAndThreadCounts) {
  const auto g = generate_exp1(60, 2, 0);
  const auto grid = make_grid(0.05, 1.95, 5);
  BandConfig cfg;
  cfg.replications = 50;
  cfg.seed = 17;
  cfg.path.compute_sensitivity = false;
  cfg.threads = 1;
  const PathBands a = bootstrap_bands(g.sample, grid, m_displacement_from(g.sample[0].p), cfg);
  cfg.threads = 4;
  const PathBands b = bootstrap_bands(g.sample, grid, m_displacement_from(g.sample[0].p), cfg);
  const PathBands c = bootstrap_bands(g.sample, grid, m_displacement_from(g.sample[0].p), cfg);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(b.lower, c.lower);
  EXPECT_EQ(b.upper, c.upper);
}

TEST(BootstrapBands, WidthShrinksLikeInverseRootN) {
  const auto grid = make_grid(0.05, 1.95, 7);
  BandConfig cfg;
  cfg.replications = 200;
  cfg.seed = 5;
  cfg.path.compute_sensitivity = false;
  auto mean_width = [&](std::size_t n) {
    const auto g = generate_exp1(n, 123, n);
    const MedianFit ref = product_weiszfeld(ScaleValue(1.0), g.sample);
    const PathBands b = bootstrap_bands(g.sample, grid, m_displacement_from(ref.location.p), cfg);
    double w = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) w += b.upper[k] - b.lower[k];
    return w / static_cast<double>(grid.size());
  };
  const double ratio = mean_width(1000) / mean_width(250);
  EXPECT_GE(ratio, 0.4);
  EXPECT_LE(ratio, 0.6);
}

TEST(PathCsv, HeaderAndRowCount) {
  const auto g = generate_exp1(50, 4, 0);
  const auto grid = make_grid(0.05, 1.95, 5);
  const std::string csv = path_csv(solve_path(g.sample, grid));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "alpha,objective,displacement_M,displacement_N,S,S_M,S_N,converged");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

}  // namespace
}  // namespace prodmed
