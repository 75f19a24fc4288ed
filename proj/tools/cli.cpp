#include "cli.hpp"

#include "plugvol/mc_harness.hpp"
#include "plugvol/noise_fit.hpp"
#include "plugvol/plugin.hpp"
#include "plugvol/scenario_io.hpp"
#include "plugvol/series_io.hpp"
#include "plugvol/simulator.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace plugvol::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t default_workers() {
  if (const char* env = std::getenv("PLUGVOL_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

json load_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& estimate_names() {
  static const std::vector<std::string> names = {"threshold_rv", "bipower",    "hayashi_yoshida",
                                                 "quarticity",   "identity",   "functional",
                                                 "vol_of_vol"};
  return names;
}

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string valid_list(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

// Noise block: {"impact": name, "method": LR|MSE|QMLE, "lower": [...], "upper": [...]}.
struct NoiseChoice {
  std::string impact = "none";
  FitMethod method = FitMethod::LR;
  std::vector<double> lower, upper;
  double half_width = 1.0;
};

NoiseChoice noise_from_json(const json& j) {
  NoiseChoice n;
  if (j.is_null()) return n;
  for (const auto& [k, v] : j.items())
    if (k != "impact" && k != "method" && k != "lower" && k != "upper" && k != "half_width")
      throw ConfigError("unknown noise key '" + k + "'");
  n.impact = j.value("impact", n.impact);
  n.method = fit_method_from_string(j.value("method", std::string("LR")));
  if (j.contains("lower")) n.lower = j.at("lower").get<std::vector<double>>();
  if (j.contains("upper")) n.upper = j.at("upper").get<std::vector<double>>();
  n.half_width = j.value("half_width", n.half_width);
  return n;
}

json to_json(const NoiseChoice& n, const ParamBox& box) {
  return {{"impact", n.impact},
          {"method", to_string(n.method)},
          {"lower", std::vector<double>(box.lower.data(), box.lower.data() + box.lower.size())},
          {"upper", std::vector<double>(box.upper.data(), box.upper.data() + box.upper.size())}};
}

ImpactFunction resolve_impact(const NoiseChoice& n) {
  // Default covariate count for bare names; "none" needs no columns.
  const std::size_t q = n.impact == "spread_power" ? 2 : n.impact == "none" ? 0 : 1;
  return ImpactFunction::from_name(n.impact, q);
}

ParamBox resolve_box(const NoiseChoice& n, const ImpactFunction& impact) {
  const std::size_t l = impact.param_dim();
  ParamBox box = ParamBox::symmetric(l, n.half_width);
  if (!n.lower.empty() || !n.upper.empty()) {
    if (n.lower.size() != l || n.upper.size() != l)
      throw ConfigError("noise bounds need " + std::to_string(l) + " entries each");
    box.lower = Eigen::Map<const Eigen::VectorXd>(n.lower.data(), static_cast<Eigen::Index>(l));
    box.upper = Eigen::Map<const Eigen::VectorXd>(n.upper.data(), static_cast<Eigen::Index>(l));
  }
  return box;
}

std::vector<fs::path> resolve_inputs(const json& config, const Common& c) {
  std::vector<fs::path> in = c.inputs;
  if (in.empty() && config.contains("inputs"))
    for (const auto& p : config.at("inputs")) in.emplace_back(p.get<std::string>());
  if (in.empty()) throw ConfigError("no input files (use --input or \"inputs\")");
  for (const auto& p : in)
    if (!fs::exists(p)) throw ConfigError("input file " + p.string() + " does not exist");
  return in;
}

std::vector<ObservedSeries> read_inputs(const std::vector<fs::path>& paths,
                                        const ImpactFunction& impact, const json& config) {
  CsvReadOptions opts;
  opts.expected_covariates = impact.covariate_dim();
  if (config.contains("horizon")) opts.horizon = config.at("horizon").get<double>();
  std::vector<ObservedSeries> out;
  for (const auto& p : paths) {
    ObservedSeries s = read_series_csv(p, opts);
    const auto problems = validate_series(s);
    if (!problems.empty()) {
      std::string msg = p.string() + " fails validation:";
      for (const auto& e : problems) msg += "\n  " + e;
      throw SchemaError(msg);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void check_keys(const json& j, const std::vector<std::string>& keys, const std::string& what) {
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("unknown " + what + " key '" + k + "' (valid: " + valid_list(keys) + ")");
}

std::optional<TruncationRule> rule_param(const json& p, std::span<const double> x,
                                         const SamplingGrid& grid, bool per_gap) {
  if (!p.contains("omega_bar") && !p.contains("alpha")) return std::nullopt;
  TruncationRule r = TruncationRule::automatic(x, grid, per_gap, p.value("omega_bar", 0.47));
  if (p.contains("alpha")) r.alpha = p.at("alpha").get<double>();
  return r;
}

}  // namespace

//---------------------------------------------------------------------------
int cmd_simulate(const json& config, const Common& c, std::ostream& log) {
  json scen = config.contains("scenario") ? config.at("scenario") : config;
  if (config.contains("scenario")) check_keys(config, {"scenario", "replication"}, "simulate");
  MarketScenario sc = scenario_from_json(scen);
  if (c.seed) sc.seed = *c.seed;
  sc.validate();
  const std::uint64_t rep = config.contains("scenario") ? config.value("replication", 0ULL) : 0ULL;
  const Realization r = simulate_market(sc, rep);
  prepare_out(c.out);
  for (std::size_t a = 0; a < r.series.size(); ++a) {
    const fs::path p = c.out / ("asset" + std::to_string(a + 1) + ".csv");
    write_series_csv(p, r.series[a]);
    log << "wrote " << p.string() << " (" << r.series[a].size() << " rows)\n";
  }
  for (const auto& f : r.flags) log << "flag: " << f << '\n';
  write_json(c.out / "resolved_config.json", {{"scenario", to_json(sc)}, {"replication", rep}});
  return kExitOk;
}

int cmd_fit_noise(const json& config, const Common& c, std::ostream& log) {
  check_keys(config, {"inputs", "noise", "horizon"}, "fit-noise");
  const NoiseChoice nc = noise_from_json(config.value("noise", json()));
  const ImpactFunction impact = resolve_impact(nc);
  const ParamBox box = resolve_box(nc, impact);
  const auto paths = resolve_inputs(config, c);
  const auto series = read_inputs(paths, impact, config);
  json fits = json::array();
  for (const auto& s : series) fits.push_back(to_json(fit_noise(s, impact, box, nc.method)));
  prepare_out(c.out);
  write_json(c.out / "fit.json", {{"fits", fits}});
  json resolved = {{"noise", to_json(nc, box)}};
  resolved["inputs"] = json::array();
  for (const auto& p : paths) resolved["inputs"].push_back(p.string());
  if (config.contains("horizon")) resolved["horizon"] = config.at("horizon");
  write_json(c.out / "resolved_config.json", resolved);
  log << "wrote " << (c.out / "fit.json").string() << '\n';
  return kExitOk;
}

int cmd_estimate(const json& config, const Common& c, std::ostream& log) {
  check_keys(config, {"inputs", "noise", "horizon", "estimator", "params"}, "estimate");
  const std::string name = config.value("estimator", std::string("threshold_rv"));
  const auto& names = estimate_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError("unknown estimator '" + name + "' (valid: " + valid_list(names) + ")");
  const json params = config.value("params", json::object());
  const NoiseChoice nc = noise_from_json(config.value("noise", json()));
  const ImpactFunction impact = resolve_impact(nc);
  const ParamBox box = resolve_box(nc, impact);
  const auto paths = resolve_inputs(config, c);
  if (name == "hayashi_yoshida" && paths.size() != 2)
    throw ConfigError("hayashi_yoshida needs exactly 2 input files, got " +
                      std::to_string(paths.size()));
  if (name != "hayashi_yoshida" && name != "functional" && paths.size() != 1)
    throw ConfigError(name + " needs exactly 1 input file, got " + std::to_string(paths.size()));
  const auto series = read_inputs(paths, impact, config);
  std::vector<FittedNoise> fits;
  for (const auto& s : series) fits.push_back(fit_noise(s, impact, box, nc.method));

  EstimateReport rep;
  if (name == "threshold_rv") {
    RvOptions o;
    o.beta = params.value("beta", 0.6);
    o.activity_index = params.value("activity_index", 0.0);
    o.rule = rule_param(params, plugin_price(series[0], fits[0]), series[0].grid, true);
    rep = plugin_threshold_rv(series[0], fits[0], o);
  } else if (name == "bipower") {
    BipowerOptions o;
    o.rule = rule_param(params, plugin_price(series[0], fits[0]), series[0].grid, false);
    rep = plugin_bipower(series[0], fits[0], o);
  } else if (name == "hayashi_yoshida") {
    rep = plugin_hy(series[0], fits[0], series[1], fits[1]);
  } else if (name == "vol_of_vol") {
    VolOfVolOptions o;
    o.c = params.value("c", 1.0);
    if (params.contains("k")) o.k = params.at("k").get<std::size_t>();
    rep = plugin_vol_of_vol(series[0], fits[0], o);
  } else {
    FunctionalOptions o;
    const std::string g = name == "functional" ? params.value("g", std::string("quarticity")) : name;
    o.g = Functional::from_name(g);
    if (o.g.dim() != series.size())
      throw ConfigError("functional " + g + " needs " + std::to_string(o.g.dim()) +
                        " input files, got " + std::to_string(series.size()));
    if (params.contains("k")) o.k = params.at("k").get<std::size_t>();
    rep = plugin_functional(series, fits, o);
  }
  json fj = json::array();
  for (const auto& f : fits) fj.push_back(to_json(f));
  prepare_out(c.out);
  write_json(c.out / "estimate.json", {{"report", to_json(rep)}, {"fits", fj}});
  json resolved = {{"estimator", name}, {"params", params}, {"noise", to_json(nc, box)}};
  resolved["inputs"] = json::array();
  for (const auto& p : paths) resolved["inputs"].push_back(p.string());
  if (config.contains("horizon")) resolved["horizon"] = config.at("horizon");
  write_json(c.out / "resolved_config.json", resolved);
  log << name << " = " << format_double(rep.xi_hat) << '\n';
  return kExitOk;
}

namespace {

void write_traces_csv(const fs::path& path, const std::vector<McSummary>& sums) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "experiment,n,replication,statistic,value\n";
  for (const auto& s : sums)
    for (const auto& t : s.traces)
      os << s.name << ',' << format_double(t.level) << ',' << t.replication << ',' << t.statistic
         << ',' << format_double(t.value) << '\n';
}

}  // namespace

int cmd_montecarlo(const json& config, const Common& c, std::ostream& log) {
  std::vector<ExperimentPlan> plans;
  std::size_t workers = c.workers.value_or(default_workers());
  if (config.contains("experiments")) {
    check_keys(config, {"experiments", "workers"}, "suite");
    if (!c.workers && config.contains("workers")) workers = config.at("workers").get<std::size_t>();
    for (const auto& e : config.at("experiments")) plans.push_back(plan_from_json(e));
  } else {
    if (!c.workers && config.contains("workers")) workers = config.at("workers").get<std::size_t>();
    plans.push_back(plan_from_json(config));
  }
  for (auto& p : plans) {
    p.workers = workers;
    if (c.seed) p.seed_base = *c.seed;
    p.validate();
  }
  prepare_out(c.out);
  json resolved = {{"experiments", json::array()}, {"workers", workers}};
  for (const auto& p : plans) {
    json pj = to_json(p);
    pj.erase("workers");
    resolved["experiments"].push_back(pj);
  }
  write_json(c.out / "resolved_config.json", resolved);

  std::vector<McSummary> sums;
  bool pass = true;
  json out = {{"experiments", json::array()}};
  for (const auto& p : plans) {
    sums.push_back(run_experiment(p));
    const auto& s = sums.back();
    pass = pass && s.pass;
    out["experiments"].push_back(to_json(s));
    log << (s.pass ? "PASS " : "FAIL ") << s.name << '\n';
    for (const auto& ch : s.checks)
      log << "  " << (ch.pass ? "ok   " : "fail ") << ch.name << " = " << format_double(ch.value)
          << (ch.detail.empty() ? "" : " (" + ch.detail + ")") << '\n';
  }
  out["pass"] = pass;
  write_json(c.out / "summary.json", out);
  const bool any_traces =
      std::any_of(sums.begin(), sums.end(), [](const McSummary& s) { return !s.traces.empty(); });
  if (any_traces) write_traces_csv(c.out / "traces.csv", sums);
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_report(const json& summary, const Common& c, std::ostream& log) {
  if (!summary.contains("experiments")) throw ConfigError("report needs a montecarlo summary.json");
  prepare_out(c.out);
  const fs::path path = c.out / "report.csv";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "experiment,n,replication,statistic,value\n";
  std::size_t rows = 0;
  for (const auto& e : summary.at("experiments")) {
    const auto name = e.at("name").get<std::string>();
    if (e.contains("traces")) {
      for (const auto& t : e.at("traces")) {
        os << name << ',' << format_double(t.at(0).get<double>()) << ',' << t.at(1).get<std::size_t>()
           << ',' << t.at(2).get<std::string>() << ',' << format_double(t.at(3).get<double>()) << '\n';
        ++rows;
      }
    }
    // Per-level aggregates use replication -1.
    for (const auto& l : e.at("levels")) {
      for (const char* key : {"bias", "rmse", "coverage95", "ks_p", "median_plugin_oracle_gap",
                              "median_avar_ratio"}) {
        if (!l.contains(key) || l.at(key).is_null()) continue;
        os << name << ',' << format_double(l.at("level").get<double>()) << ",-1," << key << ','
           << format_double(l.at(key).get<double>()) << '\n';
        ++rows;
      }
    }
  }
  write_json(c.out / "resolved_config.json", {{"summary_experiments", summary.at("experiments").size()}});
  log << "wrote " << path.string() << " (" << rows << " rows)\n";
  return kExitOk;
}

//---------------------------------------------------------------------------
int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"plug-in volatility estimation under parametric microstructure noise"};
  app.require_subcommand(1);
  Common common;
  std::string config_path, out_dir = ".";
  std::int64_t seed = -1;
  std::size_t workers = 0;
  std::vector<std::string> inputs;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "JSON config file");
    if (config_required) opt->required();
    sub->add_option("--seed", seed, "seed override")->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", workers, "worker threads (default: $PLUGVOL_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory");
  };
  auto* sim = app.add_subcommand("simulate", "simulate a scenario and write CSV files");
  add_common(sim, true);
  auto* fit = app.add_subcommand("fit-noise", "fit the noise parameter on CSV data");
  add_common(fit, false);
  fit->add_option("--input", inputs, "input CSV (repeatable)");
  auto* est = app.add_subcommand("estimate", "run a plug-in estimator on CSV data");
  add_common(est, false);
  est->add_option("--input", inputs, "input CSV (repeatable)");
  auto* mc = app.add_subcommand("montecarlo", "run Monte Carlo experiments");
  add_common(mc, true);
  auto* rep = app.add_subcommand("report", "long-format CSV from a montecarlo summary");
  add_common(rep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_path.empty()) common.config = config_path;
    if (seed >= 0) common.seed = static_cast<std::uint64_t>(seed);
    if (workers > 0) common.workers = workers;
    common.out = out_dir;
    for (const auto& i : inputs) common.inputs.emplace_back(i);
    const json config = common.config ? load_json(*common.config) : json::object();
    if (sim->parsed()) return cmd_simulate(config, common, out);
    if (fit->parsed()) return cmd_fit_noise(config, common, out);
    if (est->parsed()) return cmd_estimate(config, common, out);
    if (mc->parsed()) return cmd_montecarlo(config, common, out);
    if (rep->parsed()) return cmd_report(config, common, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace plugvol::cli
