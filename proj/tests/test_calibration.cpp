#include <gtest/gtest.h>

#include <cmath>

#include "prodmed/calibration.hpp"
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

TEST(RadialScales, ThreePointLowerMedian) {
  std::vector<ProductPoint> pts;
  for (double x : {-1.0, 0.0, 1.0}) pts.push_back(euclidean_point({x}, {2 * x}));
  const RadialScales rs = radial_scales(ProductSample(euclidean_geometry(1, 1), pts));
  EXPECT_NEAR(rs.p_hat.vector()(0), 0.0, 1e-9);
  ASSERT_EQ(rs.radial_m.size(), 3u);
  EXPECT_NEAR(rs.radial_m[0], 1.0, 1e-9);
  EXPECT_NEAR(rs.radial_m[1], 0.0, 1e-9);
  EXPECT_NEAR(rs.radial_m[2], 1.0, 1e-9);
  EXPECT_NEAR(rs.s_m, 1.0, 1e-9);
  EXPECT_NEAR(rs.s_n, 2.0, 1e-9);
}

TEST(RadialScales, IdenticalDataAreDegenerate) {
  const ProductSample s(euclidean_geometry(1, 1), std::vector<ProductPoint>(5, euclidean_point({1}, {2})));
  const RadialScales rs = radial_scales(s);
  EXPECT_EQ(rs.s_m, 0.0);
  EXPECT_TRUE(rs.degenerate);
}

TEST(RadialScales, HalfNormalMedianForStandardNormalData) {
  RandomStream rs(2024, StreamPurpose::selftest, 1);
  std::vector<ProductPoint> pts;
  for (int i = 0; i < 10000; ++i) pts.push_back(euclidean_point({rs.normal()}, {rs.normal()}));
  const RadialScales scales = radial_scales(ProductSample(euclidean_geometry(1, 1), pts));
  EXPECT_NEAR(scales.s_m, 0.6745, 0.03);
  EXPECT_NEAR(scales.s_n, 0.6745, 0.03);
}

TEST(RadialScales, IndicatorTermAveragesToZero) {
  for (int n : {9, 10, 31, 100}) {
    const auto g = generate_exp1(static_cast<std::size_t>(n), 8, static_cast<std::uint64_t>(n));
    const RadialScales rs = radial_scales(g.sample);
    double mean = 0.0;
    for (double r : rs.radial_m) mean += 0.5 - (r <= rs.s_m ? 1.0 : 0.0);
    mean /= n;
    EXPECT_GE(mean, -0.5 / n - 1e-15);
    EXPECT_LE(mean, 0.5 / n + 1e-15);
  }
}

TEST(CalibratedAlpha, ClosedForms) {
  EXPECT_DOUBLE_EQ(calibrated_alpha(3.0, 3.0).alpha.value(), 1.0);
  EXPECT_DOUBLE_EQ(calibrated_alpha(2.0, 1.0).alpha.value(), 0.4);
  const CalibratedAlpha c = calibrated_alpha(10.0, 1.0, std::nullopt, 0.05);
  EXPECT_DOUBLE_EQ(c.raw, 2.0 / 101.0);
  EXPECT_DOUBLE_EQ(c.alpha.value(), 0.05);
  EXPECT_TRUE(c.truncation_binds);
}

TEST(CalibratedAlpha, DimensionAdjusted) {
  // 2 d_M s_N^2 / (d_M s_N^2 + d_N s_M^2) with d_M = 2, d_N = 3 and unit scales.
  EXPECT_DOUBLE_EQ(calibrated_alpha(1.0, 1.0, FactorDimensions{2, 3}).raw, 0.8);
}

TEST(CalibratedAlpha, RangeAndMonotoneResponse) {
  Rng rng(51);
  for (int t = 0; t < 500; ++t) {
    const double sm = rng.uniform(1e-3, 10.0), sn = rng.uniform(1e-3, 10.0);
    const CalibratedAlpha c = calibrated_alpha(sm, sn);
    EXPECT_GT(c.raw, 0.0);
    EXPECT_LT(c.raw, 2.0);
    EXPECT_GE(c.alpha.value(), 0.05);
    EXPECT_LE(c.alpha.value(), 1.95);
    EXPECT_LT(calibrated_alpha(sm * 1.01, sn).raw, c.raw);
  }
}

TEST(CalibratedAlpha, BothScalesZeroThrows) {
  EXPECT_THROW((void)calibrated_alpha(0.0, 0.0), NumericalError);
}

TEST(CalibrationGradient, UnitScales) {
  const auto [gm, gn] = calibration_gradient(1.0, 1.0);
  EXPECT_DOUBLE_EQ(gm, -1.0);
  EXPECT_DOUBLE_EQ(gn, 1.0);
}

TEST(CalibrationGradient, MatchesFiniteDifferences) {
  Rng rng(52);
  constexpr double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    const double sm = rng.uniform(0.1, 5.0), sn = rng.uniform(0.1, 5.0);
    const std::optional<FactorDimensions> dims =
        t % 2 ? std::optional<FactorDimensions>(FactorDimensions{2, 6}) : std::nullopt;
    const auto [gm, gn] = calibration_gradient(sm, sn, dims);
    const double fm = (calibrated_alpha(sm + h, sn, dims).raw - calibrated_alpha(sm - h, sn, dims).raw) / (2 * h);
    const double fn = (calibrated_alpha(sm, sn + h, dims).raw - calibrated_alpha(sm, sn - h, dims).raw) / (2 * h);
    EXPECT_NEAR(gm, fm, 1e-6 * (1 + std::abs(fm)));
    EXPECT_NEAR(gn, fn, 1e-6 * (1 + std::abs(fn)));
  }
}

TEST(Calibrate, ExchangeableFactorsGiveCanonicalScale) {
  Rng rng(53);
  const ProductSample s = testing::exchangeable_sample(rng, 80, 2);
  const CalibrationResult c = calibrate(s);
  EXPECT_DOUBLE_EQ(c.alpha_sc.value(), 1.0);
  const MedianFit one = product_weiszfeld(ScaleValue(1.0), s);
  EXPECT_LT(product_displacement(c.fit.location, one.location), 1e-8);
}

TEST(Calibrate, MixtureMeanCalibratedScale) {
  std::vector<double> raw;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const RadialScales rs = radial_scales(generate_exp1(300, 77, r).sample);
    raw.push_back(calibrated_alpha(rs.s_m, rs.s_n).raw);
  }
  EXPECT_NEAR(stats::mean(raw), 0.8779, 0.1);
}

TEST(Calibrate, ContaminationSeparatesRadialMedianFromRms) {
  std::vector<double> radial, rms;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto g = generate_exp2_contaminated(300, {0.05}, 77, r);
    const RadialScales a = radial_scales(g.sample, ScaleMethod::radial_median);
    const RadialScales b = radial_scales(g.sample, ScaleMethod::rms);
    radial.push_back(calibrated_alpha(a.s_m, a.s_n).raw);
    rms.push_back(calibrated_alpha(b.s_m, b.s_n).raw);
  }
  EXPECT_NEAR(stats::mean(radial), 0.7932, 0.1);
  EXPECT_NEAR(stats::mean(rms), 0.1574, 0.08);
}

TEST(Calibrate, RadialMedianStaysAboveRmsUnderContamination) {
  for (double eta : {0.05, 0.10}) {
    std::vector<double> radial, rms;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto g = generate_exp2_contaminated(300, {eta}, 5, r);
      const RadialScales a = radial_scales(g.sample, ScaleMethod::radial_median);
      const RadialScales b = radial_scales(g.sample, ScaleMethod::rms);
      radial.push_back(calibrated_alpha(a.s_m, a.s_n).raw);
      rms.push_back(calibrated_alpha(b.s_m, b.s_n).raw);
    }
    EXPECT_GT(stats::mean(radial), stats::mean(rms)) << "eta " << eta;
  }
}

TEST(UnitRescale, IdentityRescaleHasZeroDrift) {
  const auto g = generate_exp1(150, 9, 0);
  EXPECT_EQ(unit_rescale_check(g.sample, 1.0, 1.0).drift, 0.0);
}

TEST(UnitRescale, CalibratedLocationIsUnitFree) {
  const auto g = generate_exp1(300, 9, 1);
  CalibrationConfig cfg;
  cfg.truncate = false;
  cfg.epsilon = 1e-6;
  for (double c : {0.1, 0.25, 0.5, 2.0, 4.0, 10.0}) {
    const RescaleReport rep = unit_rescale_check(g.sample, c, 1.0, cfg);
    EXPECT_LE(rep.drift, 1e-6) << "c " << c;
    EXPECT_LE(std::abs(rep.ratio_rescaled - rep.ratio_reference), 1e-8) << "c " << c;
  }
}

TEST(UnitRescale, CoordinatewiseEquivarianceUnderRandomRescaling) {
  Rng rng(54);
  int used = 0;
  for (int t = 0; t < 30; ++t) {
    const double cm = std::exp(rng.uniform(-1.0, 1.0));
    const double cn = std::exp(rng.uniform(-1.0, 1.0));
    const auto g = t % 2 ? generate_exp4_gaussians(50, 3, 10, static_cast<std::uint64_t>(t))
                         : generate_exp1(100, 10, static_cast<std::uint64_t>(t));
    const CalibrationResult a = calibrate(g.sample);
    const CalibrationResult b = calibrate(g.sample.with_units(cm, cn));
    if (a.truncation_binds || b.truncation_binds) continue;
    ++used;
    EXPECT_LT((a.fit.location.p.matrix() - b.fit.location.p.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.fit.location.q.matrix() - b.fit.location.q.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_GT(used, 20);
}

TEST(InfluenceAndVsc, ZeroScaleInfluenceWhenTruncationBinds) {
  const auto g = generate_exp1(200, 3, 0);
  const CalibrationResult c = calibrate(g.sample.with_units(10.0, 1.0));
  ASSERT_TRUE(c.truncation_binds);
  const CalibratedSandwich sw = influence_and_Vsc(g.sample.with_units(10.0, 1.0), c);
  for (double v : sw.influence.phi_alpha) EXPECT_EQ(v, 0.0);
}

TEST(InfluenceAndVsc, ScaleInfluenceIsCentered) {
  const auto g = generate_exp1(300, 3, 1);
  const CalibrationResult c = calibrate(g.sample);
  const CalibratedSandwich sw = influence_and_Vsc(g.sample, c);
  EXPECT_NEAR(stats::mean(sw.influence.phi_alpha), 0.0, 1e-12);
  EXPECT_LT((sw.V_sc - sw.V_sc.transpose()).norm(), 1e-12 * sw.V_sc.norm());
}

TEST(InfluenceAndVsc, AgreesWithBootstrapCovariance) {
  const auto g = generate_exp1(1000, 31, 0);
  const CalibrationResult c = calibrate(g.sample);
  const CalibratedSandwich sw = influence_and_Vsc(g.sample, c);
  const ProductChart chart(g.sample.geometry(), c.fit.location, c.alpha_sc);
  constexpr int kB = 500;
  Eigen::MatrixXd coords(kB, chart.dimension());
  RandomStream rs(31, StreamPurpose::bootstrap, 0);
  std::vector<std::size_t> idx(g.sample.size());
  for (int b = 0; b < kB; ++b) {
    for (auto& i : idx) i = rs.uniform_index(g.sample.size());
    const CalibrationResult cb = calibrate(g.sample.subset(idx));
    coords.row(b) = chart.log(cb.fit.location).transpose();
  }
  const Eigen::MatrixXd centered = coords.rowwise() - coords.colwise().mean();
  const Eigen::MatrixXd boot = centered.transpose() * centered / (kB - 1) * static_cast<double>(g.sample.size());
  const double top_boot = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(boot).eigenvalues().maxCoeff();
  const double top_sw = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sw.V_sc).eigenvalues().maxCoeff();
  EXPECT_GE(top_sw / top_boot, 0.5);
  EXPECT_LE(top_sw / top_boot, 2.0);
}

}  // namespace
}  // namespace prodmed
