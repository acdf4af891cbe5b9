#include <gtest/gtest.h>

#include <cmath>

#include "prodmed/error.hpp"
#include "prodmed/manifold.hpp"
#include "prodmed/spd.hpp"
#include "test_support.hpp"

namespace prodmed {
namespace {

using testing::Rng;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

TEST(FactorDistance, EuclideanPythagorean) {
  EXPECT_DOUBLE_EQ(factor_distance(FactorPoint::euclidean(vec({0, 0})), FactorPoint::euclidean(vec({3, 4}))), 5.0);
}

TEST(FactorDistance, BwIdentityPairIsZero) {
  const auto i2 = FactorPoint::spd(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(factor_distance(i2, i2), 0.0, 1e-14);
}

TEST(FactorDistance, BwCommutingDiagonalClosedForm) {
  const double d = factor_distance(FactorPoint::spd(diag({1, 4})), FactorPoint::spd(diag({9, 16})));
  EXPECT_NEAR(d, std::sqrt(8.0), 1e-12);
}

TEST(FactorDistance, MismatchedGeometryThrows) {
  EXPECT_THROW((void)factor_distance(FactorPoint::euclidean(vec({0, 0})), FactorPoint::euclidean(vec({1}))),
               GeometryError);
  EXPECT_THROW((void)factor_distance(FactorPoint::euclidean(vec({1, 0})), FactorPoint::spd(diag({1, 1}))),
               GeometryError);
}

TEST(FactorPoint, RejectsNonSpdMatrices) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW((void)FactorPoint::spd(asym), GeometryError);
  EXPECT_THROW((void)FactorPoint::spd(diag({1, -1})), GeometryError);
  EXPECT_THROW((void)FactorPoint::spd(diag({1, 0})), GeometryError);
}

TEST(FactorDistance, SymmetricAndTriangleOnRandomInputs) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + t % 3;
    const auto a = FactorPoint::spd(rng.spd(d));
    const auto b = FactorPoint::spd(rng.spd(d));
    const auto c = FactorPoint::spd(rng.spd(d));
    EXPECT_LT(std::abs(factor_distance(a, b) - factor_distance(b, a)), 1e-10);
    EXPECT_LE(factor_distance(a, c), factor_distance(a, b) + factor_distance(b, c) + 1e-9);
    const auto x = FactorPoint::euclidean(rng.vector(d));
    const auto y = FactorPoint::euclidean(rng.vector(d));
    EXPECT_LT(std::abs(factor_distance(x, y) - factor_distance(y, x)), 1e-10);
  }
}

TEST(FactorDistance, BwMatchesEigendecompositionOracle) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 4;
    const Eigen::MatrixXd s1 = rng.spd(d);
    const Eigen::MatrixXd s2 = rng.spd(d);
    const double oracle = testing::bw_distance_oracle(s1, s2);
    EXPECT_NEAR(factor_distance(FactorPoint::spd(s1), FactorPoint::spd(s2)), oracle, 1e-9 * (1.0 + oracle));
  }
}

TEST(FactorDistance, BwCommutingMatricesMatchClosedForm) {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 4;
    const Eigen::MatrixXd q = rng.orthogonal(d);
    Eigen::VectorXd lam(d), mu(d);
    for (int k = 0; k < d; ++k) {
      lam(k) = rng.uniform(0.1, 4.0);
      mu(k) = rng.uniform(0.1, 4.0);
    }
    const Eigen::MatrixXd s1 = spd::symmetrize(q * lam.asDiagonal() * q.transpose());
    const Eigen::MatrixXd s2 = spd::symmetrize(q * mu.asDiagonal() * q.transpose());
    const double exact = (lam.cwiseSqrt() - mu.cwiseSqrt()).norm();
    EXPECT_LT(std::abs(factor_distance(FactorPoint::spd(s1), FactorPoint::spd(s2)) - exact) / exact, 1e-10);
  }
}

TEST(FactorDistance, NearbyBwMatricesKeepRelativeAccuracy) {
  const Eigen::MatrixXd s = diag({1.0, 2.0});
  Eigen::MatrixXd t = s;
  t(0, 0) += 1e-10;
  // Commuting closed form: |sqrt(1 + 1e-10) - 1|.
  const double exact = std::sqrt(1.0 + 1e-10) - 1.0;
  EXPECT_NEAR(factor_distance(FactorPoint::spd(s), FactorPoint::spd(t)), exact, 1e-6 * exact);
}

TEST(LogMap, EuclideanDifference) {
  const auto v = log_map(FactorPoint::euclidean(vec({1, 1})), FactorPoint::euclidean(vec({4, 5})));
  EXPECT_TRUE(v.matrix().col(0).isApprox(vec({3, 4})));
}

TEST(LogMap, BwSelfIsZero) {
  Rng rng(14);
  const auto s = FactorPoint::spd(rng.spd(3));
  EXPECT_LT(log_map(s, s).matrix().norm(), 1e-12);
}

TEST(LogMap, BwNormEqualsDistanceFromIdentity) {
  const auto base = FactorPoint::spd(Eigen::MatrixXd::Identity(2, 2));
  const auto target = FactorPoint::spd(diag({4, 9}));
  const auto v = log_map(base, target);
  EXPECT_NEAR(tangent_norm(base, v), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(tangent_norm(base, v), factor_distance(base, target), 1e-12);
}

TEST(LogMap, BwNormEqualsDistanceOnRandomPairs) {
  Rng rng(15);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 4;
    const auto a = FactorPoint::spd(rng.spd(d));
    const auto b = FactorPoint::spd(rng.spd(d));
    const double dist = testing::bw_distance_oracle(a.matrix(), b.matrix());
    EXPECT_LT(std::abs(tangent_norm(a, log_map(a, b)) - dist) / dist, 1e-8);
  }
}

TEST(ExpMap, EuclideanTranslation) {
  const auto p = exp_map(FactorPoint::euclidean(vec({0, 0})), TangentVector::euclidean(vec({1, 2})));
  EXPECT_TRUE(p.vector().isApprox(vec({1, 2})));
}

TEST(ExpMap, ZeroTangentReturnsBase) {
  Rng rng(16);
  const auto s = FactorPoint::spd(rng.spd(3));
  EXPECT_LT((exp_map(s, TangentVector::zero_at(s)).matrix() - s.matrix()).norm(), 1e-14);
  const auto x = FactorPoint::euclidean(vec({2, -1}));
  EXPECT_TRUE(exp_map(x, TangentVector::zero_at(x)).vector().isApprox(x.vector()));
}

TEST(ExpMap, BwRoundTripsNearIdentity) {
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 4;
    const auto a = FactorPoint::spd(rng.near_identity(d, 0.3));
    const auto b = FactorPoint::spd(rng.near_identity(d, 0.3));
    const auto back = exp_map(a, log_map(a, b));
    EXPECT_LT((back.matrix() - b.matrix()).norm(), 1e-8);
  }
}

TEST(ExpMap, BwLogOfExpInvertsSmallTangents) {
  Rng rng(18);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 3;
    const auto a = FactorPoint::spd(rng.near_identity(d, 0.2));
    const FactorBase base(a);
    Eigen::VectorXd c = rng.vector(base.intrinsic_dimension());
    c *= 0.8 / c.norm();
    const TangentVector v = base.from_coordinates(c);
    const auto b = base.exp(v);
    ASSERT_TRUE(b.has_value());
    EXPECT_NEAR(factor_distance(a, *b), 0.8, 1e-8);
    EXPECT_LT((base.log(*b).log.matrix() - v.matrix()).norm(), 1e-8);
  }
}

TEST(ExpMap, LeavingTheConeIsReported) {
  const auto base = FactorPoint::spd(Eigen::MatrixXd::Identity(2, 2));
  const auto v = TangentVector::symmetric(diag({-4.0, 0.0}));
  EXPECT_FALSE(try_exp_map(base, v).has_value());
  EXPECT_THROW((void)exp_map(base, v), GeometryError);
}

TEST(TangentNorm, ZeroAndEuclidean) {
  const auto x = FactorPoint::euclidean(vec({1, 1}));
  EXPECT_EQ(tangent_norm(x, TangentVector::zero_at(x)), 0.0);
  EXPECT_DOUBLE_EQ(tangent_norm(x, TangentVector::euclidean(vec({3, 4}))), 5.0);
  const auto s = FactorPoint::spd(diag({2, 3}));
  EXPECT_EQ(tangent_norm(s, TangentVector::zero_at(s)), 0.0);
}

TEST(TangentNorm, CoordinatesAreOrthonormalForTheBwMetric) {
  Rng rng(19);
  for (int t = 0; t < 50; ++t) {
    const int d = 2 + t % 3;
    const FactorBase base(FactorPoint::spd(rng.spd(d)));
    const Eigen::VectorXd c1 = rng.vector(base.intrinsic_dimension());
    const Eigen::VectorXd c2 = rng.vector(base.intrinsic_dimension());
    const TangentVector v1 = base.from_coordinates(c1);
    const TangentVector v2 = base.from_coordinates(c2);
    EXPECT_NEAR(base.inner(v1, v2), c1.dot(c2), 1e-10 * (1.0 + c1.norm() * c2.norm()));
    EXPECT_LT((base.coordinates(v1) - c1).norm(), 1e-10);
  }
}

TEST(TangentVector, SymmetricRejectsAsymmetricInput) {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW((void)TangentVector::symmetric(m), GeometryError);
}

TEST(Spd, LyapunovSolveSatisfiesEquation) {
  Rng rng(20);
  const Eigen::MatrixXd s = rng.spd(4);
  const Eigen::MatrixXd v = spd::symmetrize(rng.spd(4) - rng.spd(4));
  const Eigen::MatrixXd l = spd::solve_lyapunov(spd::SpectralRoot(s), v);
  EXPECT_LT((l * s + s * l - v).norm(), 1e-10);
}

TEST(Spd, Ar1Matrix) {
  const Eigen::MatrixXd a = spd::ar1_matrix(3, 0.7);
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0.7, 0.49, 0.7, 1, 0.7, 0.49, 0.7, 1;
  EXPECT_LT((a - expected).norm(), 1e-15);
}

}  // namespace
}  // namespace prodmed
