#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "prodmed/balanced.hpp"
#include "prodmed/calibration.hpp"
#include "prodmed/data_io.hpp"
#include "prodmed/error.hpp"
#include "prodmed/experiments.hpp"
#include "prodmed/format.hpp"
#include "prodmed/selftest.hpp"
#include "prodmed/sensitivity_path.hpp"

namespace prodmed::cli {
namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> grid;
  std::optional<std::string> out_dir;
  std::string format = "json";
  std::optional<std::string> config;
  std::optional<unsigned> threads;

  std::string data;
  int experiment = 0;
  std::optional<std::string> n_values;
  std::optional<int> reps;
  bool full = false;
  bool rms = false;
  bool dimension_adjusted = false;
  bool no_truncate = false;
  bool covariance = false;
  bool no_sandwich = false;
  std::string method = "implicit-formula";
  int bands = 0;
};

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json vector_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    a.push_back(std::move(row));
  }
  return a;
}

std::string describe(const ManifoldDescriptor& f) {
  return std::string(to_string(f.kind)) + ":" + std::to_string(f.dimension);
}

Json point_json(const ProductPoint& m) {
  return Json{{"m", vector_json(flatten(m.p))}, {"n", vector_json(flatten(m.q))}};
}

Json geometry_json(const ProductGeometry& g) { return Json{{"M", describe(g.m)}, {"N", describe(g.n)}}; }

/// Settings from --config for the single-fit commands; flags given on the command line win.
void merge_config(Options& o, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "alpha") {
        if (!o.alpha) o.alpha = std::stod(value);
      } else if (key == "epsilon") {
        if (!o.epsilon) o.epsilon = std::stod(value);
      } else if (key == "seed") {
        if (!o.seed) o.seed = std::stoull(value);
      } else if (key == "grid") {
        if (!o.grid) o.grid = value;
      } else if (key == "threads") {
        if (!o.threads) o.threads = static_cast<unsigned>(std::stoul(value));
      } else {
        throw InputError("unknown config key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw InputError("config key '" + key + "': invalid value '" + value + "'");
    }
  }
}

std::vector<double> parse_grid(const std::optional<std::string>& text, double epsilon) {
  if (!text) return make_grid(epsilon, 2.0 - epsilon, 39);
  std::map<std::string, std::string> kv{{"grid", *text}};
  ExperimentConfig probe = ExperimentConfig::defaults(1);
  probe.apply(kv);
  return make_grid(probe.grid_lo, probe.grid_hi, probe.grid_steps);
}

void emit(const Options& o, std::ostream& out, const std::string& name, const std::string& text) {
  if (o.out_dir) {
    std::filesystem::create_directories(*o.out_dir);
    const auto path = std::filesystem::path(*o.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
  } else {
    out << text;
  }
}

void emit_record(const Options& o, std::ostream& out, const std::string& stem, const Json& j,
                 const std::vector<std::pair<std::string, std::string>>& csv_fields) {
  if (o.format == "json") {
    emit(o, out, stem + ".json", j.dump(2) + "\n");
    return;
  }
  std::string head, row;
  for (std::size_t i = 0; i < csv_fields.size(); ++i) {
    head += (i ? "," : "") + csv_fields[i].first;
    row += (i ? "," : "") + csv_fields[i].second;
  }
  emit(o, out, stem + ".csv", head + "\n" + row + "\n");
}

void add_location_fields(std::vector<std::pair<std::string, std::string>>& f, const ProductPoint& m) {
  const auto pm = flatten(m.p);
  const auto qn = flatten(m.q);
  for (std::size_t i = 0; i < pm.size(); ++i) f.emplace_back("m_" + std::to_string(i + 1), format_number(pm[i], 17));
  for (std::size_t i = 0; i < qn.size(); ++i) f.emplace_back("n_" + std::to_string(i + 1), format_number(qn[i], 17));
}

double epsilon_of(const Options& o) { return o.epsilon.value_or(kDefaultEpsilon); }

int cmd_median(const Options& o, std::ostream& out) {
  const ProductSample sample = read_sample_csv(std::filesystem::path(o.data));
  const ScaleValue alpha(o.alpha.value_or(1.0), epsilon_of(o));
  const MedianFit fit = product_weiszfeld(alpha, sample);
  Json j{{"command", "median"},
         {"alpha", alpha.value()},
         {"epsilon", alpha.epsilon()},
         {"geometry", geometry_json(sample.geometry())},
         {"location", point_json(fit.location)},
         {"objective", number(fit.objective)},
         {"iterations", fit.iterations},
         {"converged", fit.converged},
         {"gradient_norm", number(fit.gradient_norm)}};
  std::vector<std::pair<std::string, std::string>> f{{"alpha", format_number(alpha.value(), 17)},
                                                     {"objective", format_number(fit.objective, 17)},
                                                     {"iterations", std::to_string(fit.iterations)},
                                                     {"converged", fit.converged ? "1" : "0"}};
  add_location_fields(f, fit.location);
  emit_record(o, out, "median", j, f);
  return fit.converged ? kExitOk : kExitNumerical;
}

int cmd_path(const Options& o, std::ostream& out) {
  const ProductSample sample = read_sample_csv(std::filesystem::path(o.data));
  const double eps = epsilon_of(o);
  const auto grid = parse_grid(o.grid, eps);
  PathConfig pc;
  if (o.method == "finite-difference") {
    pc.method = PathMethod::finite_difference;
  } else if (o.method != "implicit-formula") {
    throw InputError("--method must be implicit-formula or finite-difference");
  }
  const PathResult path = solve_path(sample, grid, eps, pc);
  std::optional<PathBands> bands;
  if (o.bands > 0) {
    BandConfig bc;
    bc.path = pc;
    bc.path.compute_sensitivity = false;
    bc.replications = o.bands;
    bc.seed = o.seed.value_or(1);
    bc.threads = o.threads.value_or(0);
    const FactorPoint reference = path.reference->location.p;
    bands = bootstrap_bands(sample, grid, [reference](const ProductPoint& m) { return factor_distance(m.p, reference); },
                            bc, eps);
  }
  if (o.format == "csv") {
    emit(o, out, "path.csv", path_csv(path, bands ? &*bands : nullptr));
  } else {
    std::vector<double> alphas, conv;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      alphas.push_back(grid[k]);
      conv.push_back(path.fits[k].converged ? 1.0 : 0.0);
    }
    Json j{{"command", "path"},
           {"method", to_string(path.method)},
           {"alpha", vector_json(alphas)},
           {"objective", vector_json(path.profiled)},
           {"displacement_M", vector_json(path.displacement_m)},
           {"displacement_N", vector_json(path.displacement_n)},
           {"S", vector_json(path.sensitivity)},
           {"S_M", vector_json(path.sensitivity_m)},
           {"S_N", vector_json(path.sensitivity_n)},
           {"converged", vector_json(conv)},
           {"argmin_alpha", grid[path.argmin()]}};
    if (bands) {
      j["band_lower"] = vector_json(bands->lower);
      j["band_upper"] = vector_json(bands->upper);
      j["band_replications"] = bands->replications;
      j["band_unreliable"] = bands->unreliable;
    }
    emit(o, out, "path.json", j.dump(2) + "\n");
  }
  return path.unconverged == 0 ? kExitOk : kExitNumerical;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
  const ProductSample sample = read_sample_csv(std::filesystem::path(o.data));
  CalibrationConfig cc;
  cc.epsilon = epsilon_of(o);
  cc.dimension_adjusted = o.dimension_adjusted;
  cc.truncate = !o.no_truncate;
  cc.scale_method = o.rms ? ScaleMethod::rms : ScaleMethod::radial_median;
  const CalibrationResult cal = calibrate(sample, cc);
  Json j{{"command", "calibrate"},
         {"scale_method", to_string(cal.scale_method)},
         {"s_M", number(cal.s_m)},
         {"s_N", number(cal.s_n)},
         {"alpha_raw", number(cal.alpha_raw)},
         {"alpha_sc", cal.alpha_sc.value()},
         {"epsilon", cal.alpha_sc.epsilon()},
         {"dimension_adjusted", cal.dimension_adjusted},
         {"truncation_binds", cal.truncation_binds},
         {"marginal_median", Json{{"m", vector_json(flatten(cal.marginal_median_m))},
                                  {"n", vector_json(flatten(cal.marginal_median_n))}}},
         {"location", point_json(cal.fit.location)},
         {"objective", number(cal.fit.objective)},
         {"converged", cal.fit.converged}};
  if (o.covariance) {
    const CalibratedSandwich sw = influence_and_Vsc(sample, cal);
    j["V_sc"] = matrix_json(sw.V_sc);
    j["V_sc_unreliable"] = sw.unreliable;
  }
  std::vector<std::pair<std::string, std::string>> f{{"alpha_sc", format_number(cal.alpha_sc.value(), 17)},
                                                     {"alpha_raw", format_number(cal.alpha_raw, 17)},
                                                     {"s_M", format_number(cal.s_m, 17)},
                                                     {"s_N", format_number(cal.s_n, 17)},
                                                     {"truncation_binds", cal.truncation_binds ? "1" : "0"},
                                                     {"converged", cal.fit.converged ? "1" : "0"}};
  add_location_fields(f, cal.fit.location);
  emit_record(o, out, "calibrate", j, f);
  return cal.fit.converged ? kExitOk : kExitNumerical;
}

int cmd_balance(const Options& o, std::ostream& out) {
  const ProductSample sample = read_sample_csv(std::filesystem::path(o.data));
  BalancedConfig bc;
  bc.epsilon = epsilon_of(o);
  bc.dimension_adjusted = o.dimension_adjusted;
  bc.compute_sandwich = !o.no_sandwich;
  if (o.alpha) bc.initial_alpha = *o.alpha;
  const BalancedFit fit = solve_balanced(sample, bc);
  Json j{{"command", "balance"},
         {"alpha", fit.alpha_bal.value()},
         {"epsilon", fit.alpha_bal.epsilon()},
         {"bracket", to_string(fit.bracket)},
         {"location", point_json(fit.location)},
         {"H_residual", number(fit.H_residual)},
         {"estimating_residual", number(fit.estimating_residual)},
         {"outer_iterations", fit.outer_iterations},
         {"converged", fit.converged},
         {"damped", fit.damped},
         {"dimension_adjusted", fit.dimension_adjusted},
         {"alpha_trace", vector_json(fit.alpha_trace)}};
  if (fit.sandwich_available) {
    j["alpha_se"] = number(fit.alpha_se);
    j["wald_interval"] = vector_json({fit.wald_lo, fit.wald_hi});
  }
  std::vector<std::pair<std::string, std::string>> f{
      {"alpha", format_number(fit.alpha_bal.value(), 17)},
      {"bracket", to_string(fit.bracket)},
      {"H_residual", format_number(fit.H_residual, 17)},
      {"alpha_se", format_number(fit.sandwich_available ? fit.alpha_se : std::nan(""), 17)},
      {"wald_lo", format_number(fit.sandwich_available ? fit.wald_lo : std::nan(""), 17)},
      {"wald_hi", format_number(fit.sandwich_available ? fit.wald_hi : std::nan(""), 17)},
      {"converged", fit.converged ? "1" : "0"}};
  add_location_fields(f, fit.location);
  emit_record(o, out, "balance", j, f);
  return fit.converged ? kExitOk : kExitNumerical;
}

int cmd_experiment(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = o.full ? ExperimentConfig::full_scale(o.experiment) : ExperimentConfig::defaults(o.experiment);
  if (o.config) cfg.apply(read_key_value_config(std::filesystem::path(*o.config)));
  std::map<std::string, std::string> flags;
  if (o.n_values) flags["n"] = *o.n_values;
  if (o.reps) flags["reps"] = std::to_string(*o.reps);
  if (o.seed) flags["seed"] = std::to_string(*o.seed);
  if (o.grid) flags["grid"] = *o.grid;
  if (o.epsilon) flags["epsilon"] = format_number(*o.epsilon, 17);
  if (o.threads) flags["threads"] = std::to_string(*o.threads);
  cfg.apply(flags);
  if (cfg.id != o.experiment) throw InputError("config file selects a different experiment");
  const ExperimentResult result = run_experiment(cfg);
  const std::filesystem::path dir = o.out_dir.value_or("results/exp" + std::to_string(o.experiment));
  result.write(dir);
  if (o.format == "json") {
    out << result.summary_json();
  } else {
    for (const auto& t : result.tables) out << (t.name == "summary" ? "" : "# " + t.name + "\n") << t.to_csv();
  }
  err << "wrote " << dir.string() << "\n";
  return kExitOk;
}

int cmd_selftest(const Options& o, std::ostream& out) {
  bool ok = true;
  for (const auto& r : selftest::run_all(o.seed.value_or(selftest::kDefaultSeed))) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric medians on scaled product manifolds", "prodmed"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--alpha", o.alpha, "Relative factor weight in (0, 2)");
  app.add_option("--epsilon", o.epsilon, "Truncation parameter: alpha is confined to [eps, 2 - eps]");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--grid", o.grid, "Scale grid lo:hi:steps");
  app.add_option("--out", o.out_dir, "Output directory");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--config", o.config, "Flat key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--threads", o.threads, "Worker threads (0 uses every core)");

  auto* median = app.add_subcommand("median", "Fixed-alpha product median of a data file");
  median->add_option("data", o.data, "Observation CSV")->required();
  auto* path = app.add_subcommand("path", "Median path over a scale grid");
  path->add_option("data", o.data, "Observation CSV")->required();
  path->add_option("--method", o.method, "Sensitivity method")
      ->check(CLI::IsMember({"implicit-formula", "finite-difference"}));
  path->add_option("--bands", o.bands, "Bootstrap replications for M-displacement bands (0 disables)");
  auto* calib = app.add_subcommand("calibrate", "Radial scale calibration");
  calib->add_option("data", o.data, "Observation CSV")->required();
  calib->add_flag("--rms", o.rms, "Use root-mean-square radial scales");
  calib->add_flag("--dimension-adjusted", o.dimension_adjusted, "Dimension-adjusted weight");
  calib->add_flag("--no-truncate", o.no_truncate, "Fit at the raw calibrated weight");
  calib->add_flag("--covariance", o.covariance, "Report the plug-in sandwich covariance");
  auto* balance = app.add_subcommand("balance", "Balanced location-scale estimator");
  balance->add_option("data", o.data, "Observation CSV")->required();
  balance->add_flag("--dimension-adjusted", o.dimension_adjusted, "Dimension-adjusted balance function");
  balance->add_flag("--no-sandwich", o.no_sandwich, "Skip the sandwich standard error");
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiment 1-4");
  experiment->add_option("id", o.experiment, "Experiment number")->required()->check(CLI::Range(1, 4));
  experiment->add_option("--n", o.n_values, "Comma-separated sample sizes");
  experiment->add_option("--reps", o.reps, "Replications per sample size");
  experiment->add_flag("--full", o.full, "Publication-scale sample sizes and replication counts");
  auto* self = app.add_subcommand("selftest", "Property-based self checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (o.config && !experiment->parsed()) merge_config(o, read_key_value_config(std::filesystem::path(*o.config)));
    if (median->parsed()) return cmd_median(o, out);
    if (path->parsed()) return cmd_path(o, out);
    if (calib->parsed()) return cmd_calibrate(o, out);
    if (balance->parsed()) return cmd_balance(o, out);
    if (experiment->parsed()) return cmd_experiment(o, out, err);
    if (self->parsed()) return cmd_selftest(o, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace prodmed::cli
