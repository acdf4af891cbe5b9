#include "prodmed/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "prodmed/balanced.hpp"
#include "prodmed/calibration.hpp"
#include "prodmed/error.hpp"
#include "prodmed/format.hpp"
#include "prodmed/parallel.hpp"
#include "prodmed/random.hpp"
#include "prodmed/stats.hpp"

#ifndef PRODMED_VERSION
#define PRODMED_VERSION "0.0.0"
#endif

namespace prodmed {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t stream_index(std::size_t size_index, std::size_t rep) {
  return (static_cast<std::uint64_t>(size_index) << 32) | static_cast<std::uint64_t>(rep);
}

// ----- config parsing ------------------------------------------------------

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': invalid number '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw InputError("config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw InputError("config key '" + key + "': empty list");
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

// ----- aggregation helpers ---------------------------------------------------

double mean_or_nan(const std::vector<double>& v) { return v.empty() ? kNaN : stats::mean(v); }
double sd_or_nan(const std::vector<double>& v) { return v.empty() ? kNaN : stats::sample_sd(v); }
double max_or_nan(const std::vector<double>& v) {
  return v.empty() ? kNaN : *std::max_element(v.begin(), v.end());
}
double rate(std::size_t k, std::size_t n) { return n == 0 ? kNaN : static_cast<double>(k) / static_cast<double>(n); }

class CsvLog {
 public:
  explicit CsvLog(std::vector<std::string> cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) os_ << (i ? "," : "") << cols[i];
    os_ << '\n';
  }
  CsvLog& row(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      os_ << (i ? "," : "");
      if (const auto* d = std::get_if<double>(&cells[i])) {
        os_ << format_number(*d);
      } else {
        os_ << std::get<std::string>(cells[i]);
      }
    }
    os_ << '\n';
    return *this;
  }
  [[nodiscard]] std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

double dbl(std::size_t v) { return static_cast<double>(v); }

std::string representative_path(const ProductSample& sample, const ExperimentConfig& cfg, bool sensitivity) {
  PathConfig pc;
  pc.method = cfg.path_method;
  pc.compute_sensitivity = sensitivity;
  const auto grid = make_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_steps);
  return path_csv(solve_path(sample, grid, cfg.epsilon, pc));
}

BalancedConfig wide_balanced(const ExperimentConfig& cfg) {
  BalancedConfig bc;
  bc.epsilon = cfg.wide_epsilon;
  bc.location_tolerance = 1e-10;
  bc.alpha_step_tolerance = 1e-10;
  bc.compute_sandwich = false;
  return bc;
}

// ----- experiment 1 ----------------------------------------------------------

struct Exp1Rep {
  double phi_left = kNaN, phi_right = kNaN, phi_one = kNaN, argmin_alpha = kNaN;
  std::string selected;
  bool converged = false;
};

ExperimentResult run_exp1(const ExperimentConfig& cfg) {
  ExperimentResult out{cfg, {}, {}, {}, {}};
  const auto grid = make_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_steps);
  SummaryTable table{"summary", {"n", "phi_left", "phi_right", "phi_one", "conv", "left", "right", "interior"}, {}};
  CsvLog log({"n", "rep", "phi_left", "phi_right", "phi_one", "argmin_alpha", "selected", "converged"});
  const auto reps = static_cast<std::size_t>(cfg.replications);
  for (std::size_t j = 0; j < cfg.n_values.size(); ++j) {
    const auto n = static_cast<std::size_t>(cfg.n_values[j]);
    std::vector<Exp1Rep> res(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      const auto g = generate_exp1(n, cfg.seed, stream_index(j, r), cfg.exp1);
      PathConfig pc;
      pc.compute_sensitivity = false;
      const PathResult path = solve_path(g.sample, grid, cfg.epsilon, pc);
      Exp1Rep& e = res[r];
      e.phi_left = path.profiled.front();
      e.phi_right = path.profiled.back();
      e.phi_one = path.reference->objective;
      const std::size_t k = path.argmin();
      e.argmin_alpha = grid[k];
      e.selected = k == 0 ? "left" : (k + 1 == grid.size() ? "right" : "interior");
      e.converged = path.unconverged == 0 && path.reference->converged;
    });
    std::vector<double> left, right, one;
    std::size_t conv = 0, n_left = 0, n_right = 0, n_interior = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = res[r];
      log.row({dbl(n), dbl(r), e.phi_left, e.phi_right, e.phi_one, e.argmin_alpha, e.selected,
               e.converged ? 1.0 : 0.0});
      if (!e.converged) continue;
      ++conv;
      left.push_back(e.phi_left);
      right.push_back(e.phi_right);
      one.push_back(e.phi_one);
      n_left += e.selected == "left";
      n_right += e.selected == "right";
      n_interior += e.selected == "interior";
    }
    table.rows.push_back({dbl(n), mean_or_nan(left), mean_or_nan(right), mean_or_nan(one), rate(conv, reps),
                          rate(n_left, conv), rate(n_right, conv), rate(n_interior, conv)});
  }
  out.tables.push_back(std::move(table));
  out.replications_csv = log.str();
  const auto g = generate_exp1(static_cast<std::size_t>(cfg.n_values.front()), cfg.seed, stream_index(0, 0), cfg.exp1);
  out.path_csv = representative_path(g.sample, cfg, true);
  return out;
}

// ----- experiment 2 ----------------------------------------------------------

struct Exp2Unit {
  double alpha_sc = kNaN, alpha_bal = kNaN;
  double fixed_drift = kNaN, cal_drift = kNaN, bal_drift = kNaN;
  bool converged = false;
};

struct Exp2Contam {
  double alpha_radial = kNaN, alpha_rms = kNaN;
  bool converged = false;
};

ExperimentResult run_exp2(const ExperimentConfig& cfg) {
  ExperimentResult out{cfg, {}, {}, {}, {}};
  const auto n = static_cast<std::size_t>(cfg.n_values.front());
  const auto reps = static_cast<std::size_t>(cfg.replications);
  const std::size_t nc = cfg.c_values.size();
  const std::size_t ne = cfg.eta_values.size();
  std::vector<std::vector<Exp2Unit>> unit(reps, std::vector<Exp2Unit>(nc));
  std::vector<std::vector<Exp2Contam>> contam(reps, std::vector<Exp2Contam>(ne));

  CalibrationConfig cal_cfg;
  cal_cfg.epsilon = cfg.wide_epsilon;
  cal_cfg.truncate = false;
  const BalancedConfig bal_cfg = wide_balanced(cfg);
  // Clustered outliers slow the marginal Weiszfeld iteration near data points.
  SolverConfig marginal_cfg;
  marginal_cfg.max_iterations = 5000;

  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    const auto g = generate_exp1(n, cfg.seed, stream_index(0, r), cfg.exp1);
    struct Fits {
      ProductPoint fixed, cal, bal;
      double alpha_sc, alpha_bal;
      bool converged;
    };
    auto solve_at = [&](double c) {
      const ProductSample s = g.sample.with_units(c, 1.0);
      const MedianFit fixed = product_weiszfeld(ScaleValue(1.0), s);
      const CalibrationResult cal = calibrate(s, cal_cfg);
      BalancedConfig bc = bal_cfg;
      const BalancedFit bal = solve_balanced(s, bc);
      return Fits{fixed.location, cal.fit.location, bal.location, cal.alpha_raw, bal.alpha_bal.value(),
                  fixed.converged && cal.fit.converged && bal.converged &&
                      bal.bracket == BracketStatus::root};
    };
    const Fits ref = solve_at(1.0);
    for (std::size_t k = 0; k < nc; ++k) {
      const Fits f = cfg.c_values[k] == 1.0 ? ref : solve_at(cfg.c_values[k]);
      Exp2Unit& u = unit[r][k];
      u.alpha_sc = f.alpha_sc;
      u.alpha_bal = f.alpha_bal;
      u.fixed_drift = product_displacement(f.fixed, ref.fixed);
      u.cal_drift = product_displacement(f.cal, ref.cal);
      u.bal_drift = product_displacement(f.bal, ref.bal);
      u.converged = f.converged && ref.converged;
    }
    for (std::size_t k = 0; k < ne; ++k) {
      const auto gc = generate_exp2_contaminated(n, {cfg.eta_values[k]}, cfg.seed, stream_index(0, r), cfg.exp1);
      const RadialScales radial = radial_scales(gc.sample, ScaleMethod::radial_median, marginal_cfg);
      const RadialScales rms = radial_scales(gc.sample, ScaleMethod::rms, marginal_cfg);
      Exp2Contam& e = contam[r][k];
      e.converged = radial.marginals_converged && rms.marginals_converged;
      if (!radial.degenerate) e.alpha_radial = calibrated_alpha(radial.s_m, radial.s_n).raw;
      if (!rms.degenerate) e.alpha_rms = calibrated_alpha(rms.s_m, rms.s_n).raw;
    }
  });

  CsvLog log({"block", "rep", "key", "alpha_sc", "alpha_bal", "alpha_rms", "fixed_drift", "calibrated_drift",
              "balanced_drift", "converged"});
  SummaryTable ut{"summary",
                  {"c", "fixed_drift", "calibrated_drift", "balanced_drift", "calibrated_drift_max",
                   "balanced_drift_max", "alpha_sc", "alpha_bal", "ratio_sc", "ratio_bal", "conv"},
                  {}};
  for (std::size_t k = 0; k < nc; ++k) {
    const double c = cfg.c_values[k];
    std::vector<double> fd, cd, bd, as, ab, rs, rb;
    std::size_t conv = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& u = unit[r][k];
      if (!u.converged) continue;
      ++conv;
      fd.push_back(u.fixed_drift);
      cd.push_back(u.cal_drift);
      bd.push_back(u.bal_drift);
      as.push_back(u.alpha_sc);
      ab.push_back(u.alpha_bal);
      rs.push_back(u.alpha_sc * c * c / (2.0 - u.alpha_sc));
      rb.push_back(u.alpha_bal * c * c / (2.0 - u.alpha_bal));
    }
    ut.rows.push_back({c, mean_or_nan(fd), mean_or_nan(cd), mean_or_nan(bd), max_or_nan(cd), max_or_nan(bd),
                       mean_or_nan(as), mean_or_nan(ab), mean_or_nan(rs), mean_or_nan(rb), rate(conv, reps)});
  }
  SummaryTable ct{"contamination", {"eta", "alpha_radial", "alpha_rms", "conv"}, {}};
  for (std::size_t k = 0; k < ne; ++k) {
    std::vector<double> ar, am;
    std::size_t conv = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = contam[r][k];
      if (!e.converged) continue;
      ++conv;
      if (!std::isnan(e.alpha_radial)) ar.push_back(e.alpha_radial);
      if (!std::isnan(e.alpha_rms)) am.push_back(e.alpha_rms);
    }
    ct.rows.push_back({cfg.eta_values[k], mean_or_nan(ar), mean_or_nan(am), rate(conv, reps)});
  }
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t k = 0; k < nc; ++k) {
      const auto& u = unit[r][k];
      log.row({std::string("unit"), dbl(r), cfg.c_values[k], u.alpha_sc, u.alpha_bal, kNaN, u.fixed_drift,
               u.cal_drift, u.bal_drift, u.converged ? 1.0 : 0.0});
    }
    for (std::size_t k = 0; k < ne; ++k) {
      const auto& e = contam[r][k];
      log.row({std::string("contamination"), dbl(r), cfg.eta_values[k], e.alpha_radial, kNaN, e.alpha_rms, kNaN,
               kNaN, kNaN, e.converged ? 1.0 : 0.0});
    }
  }
  out.tables.push_back(std::move(ut));
  out.tables.push_back(std::move(ct));
  out.replications_csv = log.str();
  const auto g = generate_exp1(n, cfg.seed, stream_index(0, 0), cfg.exp1);
  out.path_csv = representative_path(g.sample, cfg, true);
  return out;
}

// ----- experiment 3 ----------------------------------------------------------

struct Exp3Rep {
  double alpha = kNaN, se = kNaN, lo = kNaN, hi = kNaN;
  int outer = 0;
  bool covered = false;
  bool converged = false;
};

BalancedConfig exp3_balanced(const ExperimentConfig& cfg) {
  BalancedConfig bc;
  bc.epsilon = cfg.wide_epsilon;
  return bc;
}

ExperimentResult run_exp3(const ExperimentConfig& cfg) {
  ExperimentResult out{cfg, {}, {}, {}, {}};
  const BalancedTarget target = experiment3_target(cfg);
  out.scalars["target_alpha"] = target.alpha;
  out.scalars["target_converged"] = target.converged ? 1.0 : 0.0;
  const double alpha0 = target.alpha;
  const BalancedConfig bc = exp3_balanced(cfg);
  const auto reps = static_cast<std::size_t>(cfg.replications);
  SummaryTable table{"summary", {"n", "bias", "sd", "sqrt_n_sd", "rmse", "mean_se", "coverage", "conv"}, {}};
  CsvLog log({"n", "rep", "alpha", "se", "wald_lo", "wald_hi", "covered", "outer_iterations", "converged"});
  for (std::size_t j = 0; j < cfg.n_values.size(); ++j) {
    const auto n = static_cast<std::size_t>(cfg.n_values[j]);
    std::vector<Exp3Rep> res(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      const auto g = generate_exp1(n, cfg.seed, stream_index(j, r), cfg.exp1);
      const BalancedFit fit = solve_balanced(g.sample, bc);
      Exp3Rep& e = res[r];
      e.alpha = fit.alpha_bal.value();
      e.outer = fit.outer_iterations;
      e.converged = fit.converged && fit.bracket == BracketStatus::root;
      if (fit.sandwich_available) {
        e.se = fit.alpha_se;
        e.lo = fit.wald_lo;
        e.hi = fit.wald_hi;
        e.covered = e.lo <= alpha0 && alpha0 <= e.hi;
      }
    });
    std::vector<double> alphas, ses, sq;
    std::size_t conv = 0, covered = 0, with_se = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = res[r];
      log.row({dbl(n), dbl(r), e.alpha, e.se, e.lo, e.hi, e.covered ? 1.0 : 0.0, static_cast<double>(e.outer),
               e.converged ? 1.0 : 0.0});
      if (!e.converged) continue;
      ++conv;
      alphas.push_back(e.alpha);
      sq.push_back((e.alpha - alpha0) * (e.alpha - alpha0));
      if (!std::isnan(e.se)) {
        ++with_se;
        ses.push_back(e.se);
        covered += e.covered;
      }
    }
    const double sd = sd_or_nan(alphas);
    table.rows.push_back({dbl(n), mean_or_nan(alphas) - alpha0, sd, std::sqrt(dbl(n)) * sd,
                          std::sqrt(mean_or_nan(sq)), mean_or_nan(ses), rate(covered, with_se), rate(conv, reps)});
  }
  out.tables.push_back(std::move(table));
  out.replications_csv = log.str();
  const auto g = generate_exp1(static_cast<std::size_t>(cfg.n_values.front()), cfg.seed, stream_index(0, 0), cfg.exp1);
  out.path_csv = representative_path(g.sample, cfg, true);
  return out;
}

// ----- experiment 4 ----------------------------------------------------------

struct Exp4Rep {
  double alpha_sc = kNaN, alpha_bal = kNaN;
  double mean_sc = kNaN, cov_sc = kNaN, mean_bal = kNaN, cov_bal = kNaN;
  bool conv_sc = false, conv_bal = false;
};

ExperimentResult run_exp4(const ExperimentConfig& cfg) {
  ExperimentResult out{cfg, {}, {}, {}, {}};
  const auto reps = static_cast<std::size_t>(cfg.replications);
  SummaryTable table{"summary",
                     {"n", "method", "alpha_mean", "alpha_sd", "mean_disp_mean", "mean_disp_sd", "cov_disp_mean",
                      "cov_disp_sd", "conv"},
                     {}};
  CsvLog log({"n", "rep", "method", "alpha", "mean_disp", "cov_disp", "converged"});
  for (std::size_t j = 0; j < cfg.n_values.size(); ++j) {
    const auto n = static_cast<std::size_t>(cfg.n_values[j]);
    std::vector<Exp4Rep> res(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      const auto g = generate_exp4_gaussians(n, cfg.dimension, cfg.seed, stream_index(j, r), cfg.exp4);
      CalibrationConfig cc;
      cc.epsilon = cfg.epsilon;
      const CalibrationResult cal = calibrate(g.sample, cc);
      const ProductPoint marg{cal.marginal_median_m, cal.marginal_median_n};
      const MedianFit one = product_weiszfeld(ScaleValue(1.0, cfg.epsilon), g.sample, marg);
      BalancedConfig bc;
      bc.epsilon = cfg.epsilon;
      bc.init = cal.fit.location;
      bc.initial_alpha = cal.alpha_sc.value();
      bc.compute_sandwich = false;
      const BalancedFit bal = solve_balanced(g.sample, bc);
      Exp4Rep& e = res[r];
      e.alpha_sc = cal.alpha_sc.value();
      e.alpha_bal = bal.alpha_bal.value();
      e.mean_sc = factor_distance(cal.fit.location.p, one.location.p);
      e.cov_sc = factor_distance(cal.fit.location.q, one.location.q);
      e.mean_bal = factor_distance(bal.location.p, one.location.p);
      e.cov_bal = factor_distance(bal.location.q, one.location.q);
      e.conv_sc = cal.fit.converged && one.converged;
      e.conv_bal = bal.converged && bal.bracket == BracketStatus::root && one.converged;
    });
    struct Acc {
      std::vector<double> alpha, md, cd;
      std::size_t conv = 0;
    } sc, bl;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = res[r];
      log.row({dbl(n), dbl(r), std::string("balanced"), e.alpha_bal, e.mean_bal, e.cov_bal, e.conv_bal ? 1.0 : 0.0});
      log.row({dbl(n), dbl(r), std::string("calibrated"), e.alpha_sc, e.mean_sc, e.cov_sc, e.conv_sc ? 1.0 : 0.0});
      if (e.conv_bal) {
        ++bl.conv;
        bl.alpha.push_back(e.alpha_bal);
        bl.md.push_back(e.mean_bal);
        bl.cd.push_back(e.cov_bal);
      }
      if (e.conv_sc) {
        ++sc.conv;
        sc.alpha.push_back(e.alpha_sc);
        sc.md.push_back(e.mean_sc);
        sc.cd.push_back(e.cov_sc);
      }
    }
    for (const auto& [name, acc] : {std::pair<std::string, const Acc&>{"balanced", bl}, {"calibrated", sc}}) {
      table.rows.push_back({dbl(n), name, mean_or_nan(acc.alpha), sd_or_nan(acc.alpha), mean_or_nan(acc.md),
                            sd_or_nan(acc.md), mean_or_nan(acc.cd), sd_or_nan(acc.cd), rate(acc.conv, reps)});
    }
  }
  out.tables.push_back(std::move(table));
  out.replications_csv = log.str();
  const auto g = generate_exp4_gaussians(static_cast<std::size_t>(cfg.n_values.front()), cfg.dimension, cfg.seed,
                                         stream_index(0, 0), cfg.exp4);
  out.path_csv = representative_path(g.sample, cfg, false);
  return out;
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return nullptr;
    return *d;
  }
  return std::get<std::string>(c);
}

}  // namespace

// ----- config -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(int id) {
  ExperimentConfig c;
  c.id = id;
  switch (id) {
    case 1:
      c.n_values = {100, 300, 1000};
      c.replications = 100;
      break;
    case 2:
      c.n_values = {300};
      c.replications = 100;
      break;
    case 3:
      c.n_values = {100, 1000};
      c.replications = 300;
      break;
    case 4:
      c.n_values = {100, 300};
      c.replications = 50;
      break;
    default:
      throw InputError("experiment id must be 1, 2, 3 or 4");
  }
  return c;
}

ExperimentConfig ExperimentConfig::full_scale(int id) {
  ExperimentConfig c = defaults(id);
  switch (id) {
    case 1: c.replications = 500; break;
    case 2: c.replications = 500; break;
    case 3:
      c.n_values = {100, 200, 500, 1000};
      c.replications = 1000;
      break;
    default:
      c.n_values = {100, 300, 1000};
      c.replications = 300;
      break;
  }
  return c;
}

void ExperimentConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, v] : values) {
    if (key == "id" || key == "experiment") {
      id = static_cast<int>(to_integer(key, v));
    } else if (key == "n") {
      n_values.clear();
      for (double x : to_list(key, v)) n_values.push_back(static_cast<int>(to_integer(key, format_number(x))));
    } else if (key == "reps" || key == "replications") {
      replications = static_cast<int>(to_integer(key, v));
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(to_integer(key, v));
    } else if (key == "grid") {
      const auto a = v.find(':');
      const auto b = v.rfind(':');
      if (a == std::string::npos || a == b) throw InputError("config key 'grid': expected lo:hi:steps");
      grid_lo = to_double(key, v.substr(0, a));
      grid_hi = to_double(key, v.substr(a + 1, b - a - 1));
      grid_steps = static_cast<int>(to_integer(key, v.substr(b + 1)));
    } else if (key == "epsilon") {
      epsilon = to_double(key, v);
    } else if (key == "wide_epsilon") {
      wide_epsilon = to_double(key, v);
    } else if (key == "weights") {
      const auto w = to_list(key, v);
      if (w.size() != 3) throw InputError("config key 'weights': expected three values");
      exp1.weights = exp4.weights = {w[0], w[1], w[2]};
    } else if (key == "m_shift" || key == "n_shift") {
      const auto s = to_list(key, v);
      if (s.size() != 2) throw InputError("config key '" + key + "': expected two values");
      (key == "m_shift" ? exp1.m_shift : exp1.n_shift) = Eigen::Vector2d(s[0], s[1]);
    } else if (key == "noise_sd") {
      exp1.noise_sd = to_double(key, v);
    } else if (key == "c") {
      c_values = to_list(key, v);
    } else if (key == "eta") {
      eta_values = to_list(key, v);
    } else if (key == "d" || key == "dimension") {
      dimension = static_cast<int>(to_integer(key, v));
    } else if (key == "rho") {
      exp4.rho = to_double(key, v);
    } else if (key == "delta") {
      exp4.delta = to_double(key, v);
    } else if (key == "mean_noise") {
      exp4.mean_noise = to_double(key, v);
    } else if (key == "cov_noise") {
      exp4.cov_noise = to_double(key, v);
    } else if (key == "reference_size") {
      reference_size = static_cast<std::size_t>(to_integer(key, v));
    } else if (key == "path_method") {
      if (v == "implicit-formula") {
        path_method = PathMethod::implicit_formula;
      } else if (v == "finite-difference") {
        path_method = PathMethod::finite_difference;
      } else {
        throw InputError("config key 'path_method': expected implicit-formula or finite-difference");
      }
    } else if (key == "threads") {
      threads = static_cast<unsigned>(to_integer(key, v));
    } else {
      throw InputError("unknown config key '" + key + "'");
    }
  }
}

void ExperimentConfig::validate() const {
  if (id < 1 || id > 4) throw InputError("experiment id must be 1, 2, 3 or 4");
  if (n_values.empty()) throw InputError("at least one sample size is required");
  for (int n : n_values) {
    if (n < 2) throw InputError("sample sizes must be at least 2");
  }
  if (replications < 1) throw InputError("replications must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(wide_epsilon > 0.0 && wide_epsilon < 1.0)) {
    throw InputError("epsilon must lie in (0,1)");
  }
  if (grid_steps < 2 || !(grid_lo >= epsilon - 1e-12) || !(grid_hi <= 2.0 - epsilon + 1e-12) || !(grid_hi > grid_lo)) {
    throw InputError("grid must have at least two points inside [epsilon, 2 - epsilon]");
  }
  exp1.validate();
  exp4.validate();
  for (double c : c_values) {
    if (!(c > 0.0)) throw InputError("unit multipliers must be positive");
  }
  for (double e : eta_values) {
    if (!(e >= 0.0 && e <= 0.5)) throw InputError("contamination fractions must lie in [0, 0.5]");
  }
  if (dimension < 2) throw InputError("Gaussian experiment dimension must be at least 2");
  if (reference_size < 2) throw InputError("reference sample size must be at least 2");
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::vector<double> ns(n_values.begin(), n_values.end());
  return {
      {"id", std::to_string(id)},
      {"n", list_text(ns)},
      {"reps", std::to_string(replications)},
      {"seed", std::to_string(seed)},
      {"grid", format_number(grid_lo) + ":" + format_number(grid_hi) + ":" + std::to_string(grid_steps)},
      {"epsilon", format_number(epsilon)},
      {"wide_epsilon", format_number(wide_epsilon)},
      {"weights", id == 4 ? list_text({exp4.weights.begin(), exp4.weights.end()})
                          : list_text({exp1.weights.begin(), exp1.weights.end()})},
      {"m_shift", list_text({exp1.m_shift(0), exp1.m_shift(1)})},
      {"n_shift", list_text({exp1.n_shift(0), exp1.n_shift(1)})},
      {"noise_sd", format_number(exp1.noise_sd)},
      {"c", list_text(c_values)},
      {"eta", list_text(eta_values)},
      {"d", std::to_string(dimension)},
      {"rho", format_number(exp4.rho)},
      {"delta", format_number(exp4.delta)},
      {"mean_noise", format_number(exp4.mean_noise)},
      {"cov_noise", format_number(exp4.cov_noise)},
      {"reference_size", std::to_string(reference_size)},
      {"path_method", to_string(path_method)},
  };
}

// ----- tables -------------------------------------------------------------------

std::size_t SummaryTable::column(const std::string& col) const {
  const auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw InputError("table '" + name + "' has no column '" + col + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double SummaryTable::number(std::size_t row, const std::string& col) const {
  const Cell& c = rows.at(row).at(column(col));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  throw InputError("column '" + col + "' is not numeric");
}

std::size_t SummaryTable::find_row(const std::string& col, double value) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (number(r, col) == value) return r;
  }
  throw InputError("table '" + name + "' has no row with " + col + " = " + format_number(value));
}

std::size_t SummaryTable::find_row(const std::string& col, double value, const std::string& col2,
                                   const std::string& value2) const {
  const std::size_t k = column(col2);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto* s = std::get_if<std::string>(&rows[r][k]);
    if (number(r, col) == value && s && *s == value2) return r;
  }
  throw InputError("table '" + name + "' has no row with " + col + " = " + format_number(value) + ", " + col2 +
                   " = " + value2);
}

std::string SummaryTable::to_csv() const {
  CsvLog log(columns);
  for (const auto& r : rows) log.row(r);
  return log.str();
}

const SummaryTable& ExperimentResult::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw InputError("experiment result has no table '" + name + "'");
}

std::string ExperimentResult::summary_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = config.id;
  nlohmann::ordered_json tabs = nlohmann::ordered_json::object();
  for (const auto& t : tables) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
      nlohmann::ordered_json obj;
      for (std::size_t k = 0; k < t.columns.size(); ++k) obj[t.columns[k]] = cell_json(r[k]);
      rows.push_back(std::move(obj));
    }
    tabs[t.name] = std::move(rows);
  }
  j["tables"] = std::move(tabs);
  nlohmann::ordered_json sc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : scalars) sc[k] = cell_json(v);
  j["scalars"] = std::move(sc);
  return j.dump(2) + "\n";
}

std::string ExperimentResult::meta_json() const {
  nlohmann::ordered_json j;
  j["program"] = "prodmed";
  j["version"] = PRODMED_VERSION;
  j["experiment"] = config.id;
  j["rng"] = std::string(Philox4x32::name);
  j["seed"] = config.seed;
  j["reference_seed"] = kReferenceSeed;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.echo()) echo[k] = v;
  j["config"] = std::move(echo);
  return j.dump(2) + "\n";
}

void ExperimentResult::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InputError("cannot write " + (dir / name).string());
    f << text;
  };
  for (std::size_t i = 0; i < tables.size(); ++i) {
    put(i == 0 ? "summary.csv" : "summary_" + tables[i].name + ".csv", tables[i].to_csv());
  }
  put("summary.json", summary_json());
  put("replications.csv", replications_csv);
  put("path.csv", path_csv);
  put("meta.json", meta_json());
}

BalancedTarget experiment3_target(const ExperimentConfig& cfg) {
  const auto g = generate_exp1(cfg.reference_size, kReferenceSeed, 0, cfg.exp1);
  BalancedConfig bc = exp3_balanced(cfg);
  bc.compute_sandwich = false;
  const BalancedFit fit = solve_balanced(g.sample, bc);
  return {fit.location, fit.alpha_bal.value(), fit.converged};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.id) {
    case 1: return run_exp1(cfg);
    case 2: return run_exp2(cfg);
    case 3: return run_exp3(cfg);
    case 4: return run_exp4(cfg);
    default: throw InputError("experiment id must be 1, 2, 3 or 4");
  }
}

}  // namespace prodmed
