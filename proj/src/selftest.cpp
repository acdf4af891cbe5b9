#include "prodmed/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prodmed/balanced.hpp"
#include "prodmed/calibration.hpp"
#include "prodmed/experiments.hpp"
#include "prodmed/format.hpp"
#include "prodmed/generators.hpp"
#include "prodmed/median_solver.hpp"
#include "prodmed/random.hpp"
#include "prodmed/scaled_metric.hpp"
#include "prodmed/sensitivity_path.hpp"
#include "prodmed/spd.hpp"

namespace prodmed::selftest {
namespace {

RandomStream stream(std::uint64_t seed, std::uint64_t check, std::uint64_t index) {
  return RandomStream(seed, StreamPurpose::selftest, (check << 32) | index);
}

Eigen::MatrixXd random_spd(RandomStream& rs, int d) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = rs.normal();
  }
  return spd::symmetrize(g * g.transpose() / d + 0.3 * Eigen::MatrixXd::Identity(d, d));
}

FactorPoint random_factor(RandomStream& rs, const ManifoldDescriptor& f, double spread = 2.0) {
  if (f.kind == GeometryKind::euclidean) return FactorPoint::euclidean(spread * rs.normal_vector(f.dimension));
  return FactorPoint::spd(random_spd(rs, f.dimension));
}

ProductPoint random_point(RandomStream& rs, const ProductGeometry& g) {
  return {random_factor(rs, g.m), random_factor(rs, g.n)};
}

/// Cycles through Euclidean, mixed and BW products; unit scales are drawn log-uniformly.
ProductGeometry random_geometry(RandomStream& rs, std::size_t variant, bool random_units) {
  const auto scale = [&] { return random_units ? std::exp(std::log(10.0) * (2.0 * rs.uniform() - 1.0)) : 1.0; };
  const double cm = scale();
  const double cn = scale();
  switch (variant % 4) {
    case 0: return {{GeometryKind::euclidean, 2, cm}, {GeometryKind::euclidean, 3, cn}};
    case 1: return {{GeometryKind::euclidean, 2, cm}, {GeometryKind::bures_wasserstein, 2, cn}};
    case 2: return {{GeometryKind::bures_wasserstein, 2, cm}, {GeometryKind::bures_wasserstein, 3, cn}};
    default: return {{GeometryKind::euclidean, 1, cm}, {GeometryKind::euclidean, 1, cn}};
  }
}

ProductSample random_sample(RandomStream& rs, const ProductGeometry& g, std::size_t n) {
  std::vector<ProductPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rs, g));
  return ProductSample(g, std::move(pts));
}

CheckResult verdict(std::string name, bool ok, const std::string& detail) {
  return {std::move(name), ok, detail};
}

}  // namespace

CheckResult concavity(std::uint64_t seed, int fixtures) {
  constexpr double kStep = 0.01;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < fixtures; ++i) {
    RandomStream rs = stream(seed, 6, static_cast<std::uint64_t>(i));
    const ProductGeometry g = random_geometry(rs, static_cast<std::size_t>(i), true);
    const FactorSquares s = factor_squares(g, random_point(rs, g), random_point(rs, g));
    for (double a = kDefaultEpsilon + kStep; a < 2.0 - kDefaultEpsilon - 0.5 * kStep; a += kStep) {
      const double second = scaled_distance(ScaleValue(a + kStep), s) - 2.0 * scaled_distance(ScaleValue(a), s) +
                            scaled_distance(ScaleValue(a - kStep), s);
      worst = std::max(worst, second);
    }
  }
  return verdict("concavity", worst <= 1e-10,
                 "max second difference " + format_number(worst, 4) + " over " + std::to_string(fixtures) +
                     " fixtures");
}

CheckResult endpoint_identity(std::uint64_t seed, int datasets) {
  const auto grid = make_grid(kDefaultEpsilon, 2.0 - kDefaultEpsilon, 39);
  PathConfig pc;
  pc.compute_sensitivity = false;
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (int i = 0; i < datasets; ++i) {
    RandomStream rs = stream(seed, 7, static_cast<std::uint64_t>(i));
    const ProductGeometry g = random_geometry(rs, static_cast<std::size_t>(i), false);
    const ProductSample sample = random_sample(rs, g, 5 + static_cast<std::size_t>(i) % 11);
    const PathResult path = solve_path(sample, grid, kDefaultEpsilon, pc);
    unconverged += path.unconverged;
    const double grid_min = *std::min_element(path.profiled.begin(), path.profiled.end());
    const double endpoint_min = std::min(path.profiled.front(), path.profiled.back());
    worst = std::max(worst, endpoint_min - grid_min);
  }
  return verdict("endpoint-identity", worst <= 1e-6 && unconverged == 0,
                 "max endpoint excess " + format_number(worst, 4) + ", unconverged fits " +
                     std::to_string(unconverged));
}

CheckResult score_gradient(std::uint64_t seed, int fixtures) {
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < fixtures; ++i) {
    RandomStream rs = stream(seed, 8, static_cast<std::uint64_t>(i));
    const ProductGeometry g = random_geometry(rs, static_cast<std::size_t>(i), true);
    const ProductPoint m = random_point(rs, g);
    const ProductPoint z = random_point(rs, g);
    const ScaleValue alpha(kDefaultEpsilon + (2.0 - 2.0 * kDefaultEpsilon) * rs.uniform());
    const auto psi = median_score(alpha, g, m, z);
    if (!psi) continue;
    const ProductChart chart(g, m, alpha);
    const Eigen::VectorXd analytic = -chart.coordinates(psi->direction);
    Eigen::VectorXd numeric(chart.dimension());
    for (int k = 0; k < chart.dimension(); ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(chart.dimension());
      e(k) = kStep;
      const auto plus = chart.exp(e);
      const auto minus = chart.exp(-e);
      if (!plus || !minus) return verdict("score-gradient", false, "chart step left the SPD cone");
      numeric(k) = (scaled_distance(alpha, g, *plus, z) - scaled_distance(alpha, g, *minus, z)) / (2.0 * kStep);
    }
    worst = std::max(worst, (numeric - analytic).norm() / analytic.norm());
  }
  return verdict("score-gradient", worst < 1e-4,
                 "max relative error " + format_number(worst, 4) + " over " + std::to_string(fixtures) + " fixtures");
}

CheckResult balance_monotonicity(std::uint64_t seed, int samples) {
  constexpr double kScan = 1e-4;
  const double eps = kDefaultEpsilon;
  double worst_drop = 0.0;
  double worst_gap = 0.0;
  int roots = 0;
  for (int i = 0; i < samples; ++i) {
    RandomStream rs = stream(seed, 9, static_cast<std::uint64_t>(i));
    const ProductGeometry g = random_geometry(rs, static_cast<std::size_t>(i), true);
    const ProductSample sample = random_sample(rs, g, 10 + static_cast<std::size_t>(i) % 31);
    const BalanceFunction h = BalanceFunction::at(random_point(rs, g), sample);
    const auto grid = make_grid(eps, 2.0 - eps, 200);
    for (std::size_t k = 1; k < grid.size(); ++k) worst_drop = std::max(worst_drop, h(grid[k - 1]) - h(grid[k]));

    const BisectionResult bis = bisect_alpha(h, eps, 1e-12);
    const auto steps = static_cast<int>(std::floor((2.0 - 2.0 * eps) / kScan));
    std::optional<double> scan;
    for (int k = 0; k <= steps; ++k) {
      const double a = eps + k * kScan;
      if (h(a) >= 0.0) {
        scan = a;
        break;
      }
    }
    double gap = 0.0;
    if (bis.status == BracketStatus::root) {
      ++roots;
      gap = scan ? std::abs(*scan - bis.alpha.value()) : 1.0;
    } else if (bis.status == BracketStatus::boundary_low) {
      gap = scan && *scan == eps ? 0.0 : 1.0;
    } else if (bis.status == BracketStatus::boundary_high) {
      gap = scan ? 1.0 : 0.0;
    }
    worst_gap = std::max(worst_gap, gap);
  }
  return verdict("balance-monotonicity", worst_drop <= 1e-14 && worst_gap <= kScan,
                 "max decrease " + format_number(worst_drop, 4) + ", max root gap " + format_number(worst_gap, 4) +
                     ", interior roots " + std::to_string(roots) + "/" + std::to_string(samples));
}

CheckResult calibration_equivariance(std::uint64_t seed, int trials) {
  double worst = 0.0;
  int used = 0;
  for (int i = 0; i < trials; ++i) {
    RandomStream rs = stream(seed, 10, static_cast<std::uint64_t>(i));
    const double cm = std::exp(std::log(2.0) * (2.0 * rs.uniform() - 1.0));
    const double cn = std::exp(std::log(2.0) * (2.0 * rs.uniform() - 1.0));
    const auto g = i % 2 == 0 ? generate_exp1(60, seed, 1000 + static_cast<std::uint64_t>(i))
                              : generate_exp4_gaussians(40, 3, seed, 1000 + static_cast<std::uint64_t>(i));
    const RescaleReport rep = unit_rescale_check(g.sample, cm, cn);
    if (rep.truncation_binds) continue;
    ++used;
    worst = std::max(worst, rep.drift);
  }
  return verdict("calibration-equivariance", used > 0 && worst <= 1e-9,
                 "max drift " + format_number(worst, 4) + " over " + std::to_string(used) +
                     " non-binding rescalings");
}

CheckResult geometry_oracles(std::uint64_t seed) {
  std::ostringstream detail;
  bool ok = true;

  double closed_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    RandomStream rs = stream(seed, 11, static_cast<std::uint64_t>(i));
    const int d = 2 + i % 4;
    Eigen::MatrixXd g(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) g(r, c) = rs.normal();
    }
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd lam(d), mu(d);
    for (int k = 0; k < d; ++k) {
      lam(k) = 0.1 + 2.9 * rs.uniform();
      mu(k) = 0.1 + 2.9 * rs.uniform();
    }
    const auto a = FactorPoint::spd(spd::symmetrize(q * lam.asDiagonal() * q.transpose()));
    const auto b = FactorPoint::spd(spd::symmetrize(q * mu.asDiagonal() * q.transpose()));
    const double exact = (lam.cwiseSqrt() - mu.cwiseSqrt()).norm();
    closed_err = std::max(closed_err, std::abs(factor_distance(a, b) - exact) / exact);
  }
  ok = ok && closed_err < 1e-10;
  detail << "closed-form rel err " << format_number(closed_err, 4);

  double trip_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    RandomStream rs = stream(seed, 12, static_cast<std::uint64_t>(i));
    const int d = 2 + i % 4;
    const auto a = FactorPoint::spd(random_spd(rs, d));
    const auto b = FactorPoint::spd(random_spd(rs, d));
    const auto back = exp_map(a, log_map(a, b));
    trip_err = std::max(trip_err, (back.matrix() - b.matrix()).norm() / b.matrix().norm());
  }
  ok = ok && trip_err < 1e-8;
  detail << "; log/exp round trip " << format_number(trip_err, 4);

  std::size_t rises = 0;
  for (int i = 0; i < 30; ++i) {
    RandomStream rs = stream(seed, 13, static_cast<std::uint64_t>(i));
    const ProductGeometry g = random_geometry(rs, static_cast<std::size_t>(i), false);
    const ProductSample sample = random_sample(rs, g, 10 + static_cast<std::size_t>(i) % 21);
    const ScaleValue alpha(kDefaultEpsilon + (2.0 - 2.0 * kDefaultEpsilon) * rs.uniform());
    const MedianFit fit = product_weiszfeld(alpha, sample);
    const auto& tr = fit.objective_trace;
    for (std::size_t k = 1; k < tr.size(); ++k) {
      if (tr[k] > tr[k - 1] + 1e-13 * std::max(1.0, tr[k - 1])) ++rises;
    }
  }
  ok = ok && rises == 0;
  detail << "; objective rises " << rises;

  constexpr int kGrid = 400;
  int off_cell = 0;
  for (int i = 0; i < 10; ++i) {
    RandomStream rs = stream(seed, 14, static_cast<std::uint64_t>(i));
    const ProductGeometry g{{GeometryKind::euclidean, 1, 1.0}, {GeometryKind::euclidean, 1, 1.0}};
    const ProductSample sample = random_sample(rs, g, 7);
    const ScaleValue alpha(kDefaultEpsilon + (2.0 - 2.0 * kDefaultEpsilon) * rs.uniform());
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& z : sample.points()) {
      x_lo = std::min(x_lo, z.p.vector()(0));
      x_hi = std::max(x_hi, z.p.vector()(0));
      y_lo = std::min(y_lo, z.q.vector()(0));
      y_hi = std::max(y_hi, z.q.vector()(0));
    }
    const double dx = (x_hi - x_lo) / (kGrid - 1);
    const double dy = (y_hi - y_lo) / (kGrid - 1);
    double best = 1e300, bx = 0.0, by = 0.0;
    for (int a = 0; a < kGrid; ++a) {
      for (int b = 0; b < kGrid; ++b) {
        const double x = x_lo + a * dx;
        const double y = y_lo + b * dy;
        double obj = 0.0;
        for (const auto& z : sample.points()) {
          const double u = z.p.vector()(0) - x;
          const double v = z.q.vector()(0) - y;
          obj += std::sqrt(alpha.m_weight() * u * u + alpha.n_weight() * v * v);
        }
        if (obj < best) {
          best = obj;
          bx = x;
          by = y;
        }
      }
    }
    const MedianFit fit = product_weiszfeld(alpha, sample);
    if (std::abs(fit.location.p.vector()(0) - bx) > dx || std::abs(fit.location.q.vector()(0) - by) > dy) {
      ++off_cell;
    }
  }
  ok = ok && off_cell == 0;
  detail << "; grid-search mismatches " << off_cell;
  return verdict("geometry-oracles", ok, detail.str());
}

CheckResult determinism(std::uint64_t seed) {
  std::vector<ExperimentConfig> configs;
  {
    auto c = ExperimentConfig::defaults(1);
    c.n_values = {40};
    c.replications = 6;
    c.grid_steps = 9;
    configs.push_back(c);
  }
  {
    auto c = ExperimentConfig::defaults(2);
    c.n_values = {40};
    c.replications = 3;
    c.c_values = {0.5, 1.0, 2.0};
    c.eta_values = {0.0, 0.1};
    c.grid_steps = 9;
    configs.push_back(c);
  }
  {
    auto c = ExperimentConfig::defaults(3);
    c.n_values = {40};
    c.replications = 4;
    c.reference_size = 2000;
    c.grid_steps = 9;
    configs.push_back(c);
  }
  {
    auto c = ExperimentConfig::defaults(4);
    c.n_values = {20};
    c.replications = 3;
    c.dimension = 3;
    c.grid_steps = 9;
    configs.push_back(c);
  }
  std::size_t mismatches = 0;
  for (auto cfg : configs) {
    cfg.seed = seed;
    std::string reference;
    for (unsigned threads : {1u, 4u, 8u}) {
      cfg.threads = threads;
      const ExperimentResult r = run_experiment(cfg);
      std::string blob = r.summary_json() + r.replications_csv + r.path_csv + r.meta_json();
      for (const auto& t : r.tables) blob += t.to_csv();
      if (threads == 1) {
        reference = std::move(blob);
      } else if (blob != reference) {
        ++mismatches;
      }
    }
  }
  return verdict("determinism", mismatches == 0,
                 std::to_string(mismatches) + " mismatching outputs across 1/4/8 threads in 4 experiments");
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {concavity(seed),
          endpoint_identity(seed),
          score_gradient(seed),
          balance_monotonicity(seed),
          calibration_equivariance(seed),
          geometry_oracles(seed),
          determinism(seed)};
}

}  // namespace prodmed::selftest
