#include "prodmed/sensitivity_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "prodmed/error.hpp"
#include "prodmed/format.hpp"
#include "prodmed/parallel.hpp"
#include "prodmed/random.hpp"
#include "prodmed/stats.hpp"

namespace prodmed {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_grid(std::span<const double> grid, double epsilon) {
  if (grid.empty()) throw InputError("scale grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= epsilon - 1e-12 && grid[i] <= 2.0 - epsilon + 1e-12)) {
      throw InputError("scale grid value " + format_number(grid[i]) + " lies outside [" +
                       format_number(epsilon) + ", " + format_number(2.0 - epsilon) + "]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("scale grid must be strictly increasing");
  }
}

PathDerivative finish(Eigen::VectorXd coords, Eigen::VectorXd b, const ProductChart& chart,
                      ScaleValue alpha) {
  PathDerivative out{std::move(coords), chart.tangent(Eigen::VectorXd::Zero(chart.dimension())),
                     std::move(b), 0.0, 0.0, 0.0};
  out.velocity = chart.tangent(out.coordinates);
  out.S = out.coordinates.norm();
  out.S_M = out.coordinates.head(chart.m_dimension()).norm() / std::sqrt(alpha.m_weight());
  out.S_N = out.coordinates.tail(chart.n_dimension()).norm() / std::sqrt(alpha.n_weight());
  return out;
}

}  // namespace

std::string to_string(PathMethod method) {
  return method == PathMethod::implicit_formula ? "implicit-formula" : "finite-difference";
}

std::vector<double> make_grid(double lo, double hi, int steps) {
  if (steps < 1) throw InputError("grid needs at least one point");
  if (steps == 1) return {lo};
  if (!(hi > lo)) throw InputError("grid upper end must exceed the lower end");
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
  g.back() = hi;
  return g;
}

PathDerivative path_derivative(ScaleValue alpha, const ProductPoint& m_hat,
                               const ProductSample& sample,
                               const std::optional<JacobianEstimate>& A) {
  const ProductChart chart(sample.geometry(), m_hat, alpha);
  const JacobianEstimate jac = A ? *A : estimate_A_alpha(alpha, m_hat, sample);
  const ObservationTerms terms(sample, m_hat);
  ProductTangent bsum = terms.score_alpha_derivative_sum(alpha);
  bsum *= 1.0 / static_cast<double>(terms.size());
  Eigen::VectorXd b = chart.coordinates(bsum);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac.matrix);
  if (!lu.isInvertible()) throw NumericalError("score Jacobian is singular");
  Eigen::VectorXd coords = -lu.solve(b);
  return finish(std::move(coords), std::move(b), chart, alpha);
}

PathDerivative finite_difference_derivative(ScaleValue alpha, const ProductPoint& m_hat,
                                            const ProductSample& sample, double h,
                                            const SolverConfig& cfg) {
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  const ScaleValue plus = alpha.with_value(alpha.value() + h);
  const ScaleValue minus = alpha.with_value(alpha.value() - h);
  const MedianFit fp = product_weiszfeld(plus, sample, m_hat, cfg);
  const MedianFit fm = product_weiszfeld(minus, sample, m_hat, cfg);
  const ProductChart chart(sample.geometry(), m_hat, alpha);
  Eigen::VectorXd coords = (chart.log(fp.location) - chart.log(fm.location)) / (2.0 * h);
  return finish(std::move(coords), Eigen::VectorXd(), chart, alpha);
}

std::size_t PathResult::argmin() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < profiled.size(); ++i) {
    if (profiled[i] < profiled[best]) best = i;
  }
  return best;
}

PathResult solve_path(const ProductSample& sample, std::span<const double> grid, double epsilon,
                      const PathConfig& cfg) {
  validate_grid(grid, epsilon);
  if (sample.empty()) throw GeometryError("path of an empty sample");
  const std::size_t k = grid.size();
  PathResult out;
  out.method = cfg.method;
  for (double a : grid) out.grid.emplace_back(a, epsilon);

  std::vector<std::optional<MedianFit>> fits(k);
  std::optional<ProductPoint> warm = cfg.init;
  for (std::size_t step = 0; step < k; ++step) {
    const std::size_t i = cfg.reverse ? k - 1 - step : step;
    fits[i] = product_weiszfeld(out.grid[i], sample, warm, cfg.solver);
    warm = fits[i]->location;
  }
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < k; ++i) {
    out.fits.push_back(*std::move(fits[i]));
    out.profiled.push_back(out.fits.back().objective);
    if (!out.fits.back().converged) ++out.unconverged;
    if (std::abs(grid[i] - 1.0) < std::abs(grid[nearest] - 1.0)) nearest = i;
  }
  out.reference =
      product_weiszfeld(ScaleValue(1.0, epsilon), sample, out.fits[nearest].location, cfg.solver);

  const double cm = sample.geometry().m.metric_scale;
  const double cn = sample.geometry().n.metric_scale;
  out.sensitivity.assign(k, kNaN);
  out.sensitivity_m.assign(k, kNaN);
  out.sensitivity_n.assign(k, kNaN);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& loc = out.fits[i].location;
    out.displacement_m.push_back(cm * factor_distance(loc.p, out.reference->location.p));
    out.displacement_n.push_back(cn * factor_distance(loc.q, out.reference->location.q));
    if (!cfg.compute_sensitivity || i == 0 || i + 1 == k) continue;
    try {
      const PathDerivative d =
          cfg.method == PathMethod::implicit_formula
              ? path_derivative(out.grid[i], loc, sample)
              : finite_difference_derivative(out.grid[i], loc, sample, cfg.fd_step, cfg.solver);
      out.sensitivity[i] = d.S;
      out.sensitivity_m[i] = d.S_M;
      out.sensitivity_n[i] = d.S_N;
    } catch (const NumericalError&) {
      // Left as NaN: the Jacobian is singular at this grid point.
    }
  }
  return out;
}

PathBands bootstrap_bands(const ProductSample& sample, std::span<const double> grid,
                          const PathSummary& summary, const BandConfig& cfg, double epsilon) {
  if (cfg.replications < 50) throw InputError("bootstrap bands need at least 50 replications");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("band level must lie in (0,1)");
  validate_grid(grid, epsilon);
  PathConfig base_cfg = cfg.path;
  base_cfg.compute_sensitivity = false;
  const PathResult full = solve_path(sample, grid, epsilon, base_cfg);

  const std::size_t k = grid.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<double>> values(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t b) {
    RandomStream rng(cfg.seed, StreamPurpose::bootstrap, b);
    std::vector<std::size_t> idx(sample.size());
    for (auto& j : idx) j = rng.uniform_index(sample.size());
    PathConfig rep_cfg = base_cfg;
    rep_cfg.init = full.fits[rep_cfg.reverse ? k - 1 : 0].location;
    const PathResult path = solve_path(sample.subset(idx), grid, epsilon, rep_cfg);
    std::vector<double> row(k, kNaN);
    for (std::size_t i = 0; i < k; ++i) {
      if (path.fits[i].converged) row[i] = summary(path.fits[i].location);
    }
    values[b] = std::move(row);
  });

  PathBands out;
  out.alpha.assign(grid.begin(), grid.end());
  out.replications = cfg.replications;
  out.seed = cfg.seed;
  const double tail = 0.5 * (1.0 - cfg.level);
  for (std::size_t i = 0; i < k; ++i) {
    const double est = summary(full.fits[i].location);
    std::vector<double> col;
    col.reserve(reps);
    for (std::size_t b = 0; b < reps; ++b) {
      if (!std::isnan(values[b][i])) col.push_back(values[b][i]);
    }
    const int dropped = static_cast<int>(reps - col.size());
    out.dropped.push_back(dropped);
    if (dropped > static_cast<int>(0.1 * static_cast<double>(reps))) out.unreliable = true;
    out.estimate.push_back(est);
    if (col.empty()) {
      out.lower.push_back(kNaN);
      out.upper.push_back(kNaN);
      continue;
    }
    if (cfg.method == BandMethod::percentile) {
      out.lower.push_back(stats::quantile(col, tail));
      out.upper.push_back(stats::quantile(col, 1.0 - tail));
    } else {
      for (double& v : col) v = std::abs(v - est);
      const double half = stats::quantile(col, cfg.level);
      out.lower.push_back(est - half);
      out.upper.push_back(est + half);
    }
  }
  return out;
}

std::string path_csv(const PathResult& path, const PathBands* bands) {
  std::ostringstream os;
  os << "alpha,objective,displacement_M,displacement_N,S,S_M,S_N,converged";
  if (bands) os << ",band_lower,band_upper";
  os << '\n';
  for (std::size_t i = 0; i < path.grid.size(); ++i) {
    os << format_number(path.grid[i].value()) << ',' << format_number(path.profiled[i]) << ','
       << format_number(path.displacement_m[i]) << ',' << format_number(path.displacement_n[i])
       << ',' << format_number(path.sensitivity[i]) << ',' << format_number(path.sensitivity_m[i])
       << ',' << format_number(path.sensitivity_n[i]) << ',' << (path.fits[i].converged ? 1 : 0);
    if (bands) os << ',' << format_number(bands->lower[i]) << ',' << format_number(bands->upper[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace prodmed
