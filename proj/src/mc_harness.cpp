#include "plugvol/mc_harness.hpp"

#include "plugvol/scenario_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace plugvol {

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names = {
      "theta_lr",   "theta_mse", "theta_qmle",      "threshold_rv", "bipower",
      "jump_variation", "quarticity", "identity", "hayashi_yoshida", "vol_of_vol"};
  return names;
}

namespace {

std::string joined_names() {
  std::string out;
  for (const auto& n : estimator_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

bool is_theta(const std::string& name) { return name.rfind("theta_", 0) == 0; }

FitMethod theta_method(const std::string& name) { return fit_method_from_string(name.substr(6)); }

bool constant_vol(const MarketScenario& s) {
  return std::all_of(s.assets.begin(), s.assets.end(),
                     [](const AssetDynamics& a) { return a.vol.kind == VolSpec::Kind::Constant; });
}

double param(const nlohmann::json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

std::optional<TruncationRule> rule_from_params(const nlohmann::json& p, std::span<const double> x,
                                               const SamplingGrid& grid, bool per_gap) {
  if (!p.contains("omega_bar") && !p.contains("alpha")) return std::nullopt;
  const double omega = param(p, "omega_bar", 0.47);
  TruncationRule r = TruncationRule::automatic(x, grid, per_gap, omega);
  if (p.contains("alpha")) r.alpha = p.at("alpha").get<double>();
  return r;
}

FunctionalOptions functional_options(const nlohmann::json& p, const Functional& g,
                                     std::size_t n_increments) {
  FunctionalOptions o;
  o.g = g;
  if (p.contains("k")) o.k = p.at("k").get<std::size_t>();
  else if (p.contains("k_exponent"))
    o.k = static_cast<std::size_t>(
        std::floor(std::pow(static_cast<double>(n_increments), p.at("k_exponent").get<double>())));
  return o;
}

VolOfVolOptions volvol_options(const nlohmann::json& p) {
  VolOfVolOptions o;
  o.c = param(p, "c", 1.0);
  if (p.contains("k")) o.k = p.at("k").get<std::size_t>();
  o.allow_jumps = p.value("allow_jumps", false);
  return o;
}

// Applies the configured estimator to one price vector (or two for HY).
EstimateReport apply(const ExperimentPlan& plan, const std::vector<std::vector<double>>& x,
                     const std::vector<SamplingGrid>& grids) {
  const auto& name = plan.estimator.name;
  const auto& p = plan.estimator.params;
  const auto& g = grids.front();
  if (name == "threshold_rv") {
    RvOptions o;
    o.beta = param(p, "beta", 0.6);
    o.rule = rule_from_params(p, x[0], g, true);
    return threshold_rv_report(x[0], g, o);
  }
  if (name == "bipower") {
    BipowerOptions o;
    o.rule = rule_from_params(p, x[0], g, false);
    return bipower_report(x[0], g, o);
  }
  if (name == "jump_variation") {
    BipowerOptions o;
    o.rule = rule_from_params(p, x[0], g, false);
    const TruncationRule rule = o.rule ? *o.rule : TruncationRule::automatic(x[0], g, false);
    EstimateReport r;
    r.estimator_name = name;
    r.xi_hat = realized_variance(x[0]) - threshold_bipower(x[0], g, rule);
    r.scale = std::sqrt(static_cast<double>(g.increments()));
    r.observations = g.size();
    return r;
  }
  if (name == "quarticity" || name == "identity") {
    const Functional f = name == "quarticity" ? Functional::quarticity() : Functional::identity();
    return functional_report(as_paths(x[0]), g, functional_options(p, f, g.increments()));
  }
  if (name == "hayashi_yoshida") return hy_report(x[0], grids[0], x[1], grids[1]);
  if (name == "vol_of_vol") return vol_of_vol_report(x[0], g, volvol_options(p));
  throw std::invalid_argument("unknown estimator '" + name + "' (valid: " + joined_names() + ")");
}

double truth_of(const ExperimentPlan& plan, const MarketScenario& sc, const Realization& r) {
  const auto& name = plan.estimator.name;
  if (is_theta(name)) return sc.noise.theta[0];
  const bool closed = plan.truth == TruthMode::ClosedForm;
  const double t = sc.horizon;
  const auto& a0 = sc.assets[0];
  if (name == "threshold_rv" || name == "bipower" || name == "identity")
    return closed ? std::pow(a0.vol.sigma, 2) * t : r.paths[0].integrated_variance();
  if (name == "quarticity")
    return closed ? std::pow(a0.vol.sigma, 4) * t : r.paths[0].integrated_quarticity();
  if (name == "jump_variation") return r.paths[0].jump_variation();
  if (name == "vol_of_vol") return closed ? 0.0 : r.paths[0].integrated_volvol();
  if (name == "hayashi_yoshida") {
    if (closed) return sc.rho * a0.vol.sigma * sc.assets[1].vol.sigma * t;
    const auto& p1 = r.paths[0];
    const auto& p2 = r.paths[1];
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < p1.fine_times.size(); ++k)
      acc += p1.sigma[k] * p2.sigma[k] * (p1.fine_times[k + 1] - p1.fine_times[k]);
    return sc.rho * acc;
  }
  throw std::invalid_argument("unknown estimator '" + name + "' (valid: " + joined_names() + ")");
}

std::optional<double> avar_oracle_of(const ExperimentPlan& plan, const MarketScenario& sc,
                                     const Realization& r) {
  const auto& name = plan.estimator.name;
  const double t = sc.horizon;
  const auto& path = r.paths[0];
  if (name == "threshold_rv" || name == "identity") return 2.0 * t * path.integrated_quarticity();
  if (name == "bipower") return bipower_avar(path.integrated_quarticity(), t);
  if (name == "quarticity") return 8.0 * t * path.integrated_power(8);
  if (name == "vol_of_vol" && sc.assets[0].vol.kind == VolSpec::Kind::Constant)
    return vol_of_vol_avar_oracle(sc.assets[0].vol.sigma, 0.0, param(plan.estimator.params, "c", 1.0),
                                  t);
  return std::nullopt;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

LevelSummary aggregate(double level, const std::vector<ReplicationOutcome>& outs) {
  LevelSummary s;
  s.level = level;
  s.replications = outs.size();
  std::vector<double> err, rel, gaps, ratios, students;
  std::size_t ci_count = 0, covered = 0;
  double sum_est = 0.0, sum_truth = 0.0, sum_inc = 0.0;
  for (const auto& o : outs) {
    if (!o.ok) {
      ++s.failures;
      if (s.errors.size() < 3) s.errors.push_back(o.error);
      continue;
    }
    const double e = o.estimate - o.truth;
    err.push_back(e);
    rel.push_back(o.truth != 0.0 ? std::abs(e / o.truth) : std::abs(e));
    sum_est += o.estimate;
    sum_truth += o.truth;
    sum_inc += o.increments;
    if (o.covered) {
      ++ci_count;
      if (*o.covered) ++covered;
    }
    if (o.student) students.push_back(*o.student);
    if (o.oracle && o.avar_oracle && *o.avar_oracle > 0.0)
      gaps.push_back(o.scale * std::abs(o.estimate - *o.oracle) / std::sqrt(*o.avar_oracle));
    if (o.avar > 0.0 && o.avar_oracle && *o.avar_oracle > 0.0)
      ratios.push_back(o.avar / *o.avar_oracle);
  }
  const double m = static_cast<double>(err.size());
  if (err.empty()) return s;
  s.mean_estimate = sum_est / m;
  s.mean_truth = sum_truth / m;
  s.mean_increments = sum_inc / m;
  s.bias = std::accumulate(err.begin(), err.end(), 0.0) / m;
  double ss = 0.0, sd = 0.0;
  for (double e : err) {
    ss += e * e;
    sd += (e - s.bias) * (e - s.bias);
  }
  s.rmse = std::sqrt(ss / m);
  s.mean_error_se = err.size() > 1 ? std::sqrt(sd / (m - 1.0)) / std::sqrt(m) : 0.0;
  s.median_rel_error = median(rel);
  if (ci_count > 0) s.coverage95 = static_cast<double>(covered) / static_cast<double>(ci_count);
  if (students.size() >= 100) {
    const auto ks = ks_normal(students);
    s.ks_stat = ks.statistic;
    s.ks_p = ks.p_value;
  }
  if (!gaps.empty()) s.median_plugin_oracle_gap = median(gaps);
  if (!ratios.empty()) s.median_avar_ratio = median(ratios);
  return s;
}

//---------------------------------------------------------------------------
// Checks
//---------------------------------------------------------------------------
std::vector<std::size_t> selected_levels(const nlohmann::json& c, std::size_t n) {
  std::vector<std::size_t> out;
  const auto sel = c.value("level", nlohmann::json("all"));
  if (sel.is_number_integer()) {
    const auto i = sel.get<long>();
    const auto idx = i < 0 ? static_cast<long>(n) + i : i;
    if (idx < 0 || idx >= static_cast<long>(n)) throw std::invalid_argument("check level out of range");
    out.push_back(static_cast<std::size_t>(idx));
  } else if (sel == "last") {
    out.push_back(n - 1);
  } else if (sel == "first") {
    out.push_back(0);
  } else if (sel == "all") {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
  } else {
    throw std::invalid_argument("check level must be all, first, last or an index");
  }
  return out;
}

const std::vector<std::string>& check_kinds() {
  static const std::vector<std::string> kinds = {
      "slope", "coverage", "ks", "mean_error", "median_rel_error", "plugin_gap",
      "avar_ratio", "rmse_monotone", "scaled_rmse_ratio"};
  return kinds;
}

CheckResult evaluate_check(const nlohmann::json& c, const McSummary& s, bool tick_levels) {
  const std::string kind = c.at("kind").get<std::string>();
  CheckResult r;
  r.name = c.value("name", kind);
  double lo = c.value("min", -std::numeric_limits<double>::infinity());
  double hi = c.value("max", std::numeric_limits<double>::infinity());
  if (kind == "ks") lo = c.value("p_min", 0.01);
  if (kind == "mean_error") hi = c.value("max_se", 3.0);
  const auto n = s.levels.size();
  auto in_range = [&](double v) { return v >= lo && v <= hi; };

  // Per-level checks pass when every selected level is in range and report
  // the worst level.
  auto per_level = [&](auto value_of, bool want_small) {
    r.pass = true;
    std::optional<double> worst;
    for (auto i : selected_levels(c, n)) {
      const std::optional<double> v = value_of(s.levels[i]);
      if (!v || !std::isfinite(*v)) {
        r.pass = false;
        r.detail = "level " + std::to_string(i) + ": value unavailable";
        continue;
      }
      if (!in_range(*v)) {
        r.pass = false;
        r.detail = "level " + std::to_string(i) + " = " + std::to_string(*v);
      }
      if (!worst || (want_small ? *v > *worst : *v < *worst)) worst = v;
    }
    r.value = worst.value_or(std::numeric_limits<double>::quiet_NaN());
  };

  if (kind == "slope") {
    r.pass = s.rate_slope.has_value() && in_range(*s.rate_slope);
    r.value = s.rate_slope.value_or(std::numeric_limits<double>::quiet_NaN());
    if (!s.rate_slope) r.detail = "slope unavailable";
  } else if (kind == "coverage") {
    per_level([](const LevelSummary& l) { return l.coverage95; }, false);
  } else if (kind == "ks") {
    per_level([](const LevelSummary& l) { return l.ks_p; }, false);
  } else if (kind == "mean_error") {
    per_level(
        [](const LevelSummary& l) -> std::optional<double> {
          if (l.mean_error_se <= 0.0)
            return l.bias == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
          return std::abs(l.bias) / l.mean_error_se;
        },
        true);
  } else if (kind == "median_rel_error") {
    per_level([](const LevelSummary& l) -> std::optional<double> { return l.median_rel_error; }, true);
  } else if (kind == "plugin_gap") {
    per_level([](const LevelSummary& l) { return l.median_plugin_oracle_gap; }, true);
  } else if (kind == "avar_ratio") {
    per_level(
        [](const LevelSummary& l) -> std::optional<double> {
          if (!l.median_avar_ratio) return std::nullopt;
          return std::abs(*l.median_avar_ratio - 1.0);
        },
        true);
  } else if (kind == "rmse_monotone") {
    r.pass = n >= 2;
    for (std::size_t i = 1; i < n; ++i)
      if (!(s.levels[i].rmse < s.levels[i - 1].rmse)) {
        r.pass = false;
        r.detail = "rmse rises at level " + std::to_string(i);
      }
    r.value = n > 0 ? s.levels.back().rmse : 0.0;
  } else if (kind == "scaled_rmse_ratio") {
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    for (const auto& l : s.levels) {
      const double scaled = tick_levels ? l.rmse / l.level : l.rmse * std::sqrt(l.mean_increments);
      mx = std::max(mx, scaled);
      mn = std::min(mn, scaled);
    }
    r.value = mx / mn;
    r.pass = in_range(r.value);
  } else {
    std::string valid;
    for (const auto& k : check_kinds()) valid += (valid.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown check kind '" + kind + "' (valid: " + valid + ")");
  }
  return r;
}

}  // namespace

//---------------------------------------------------------------------------
// Plan
//---------------------------------------------------------------------------
void ExperimentPlan::validate() const {
  const auto& names = estimator_names();
  if (std::find(names.begin(), names.end(), estimator.name) == names.end())
    throw std::invalid_argument("unknown estimator '" + estimator.name + "' (valid: " +
                                joined_names() + ")");
  if (replications < 50)
    throw std::invalid_argument("replications must be at least 50, got " +
                                std::to_string(replications));
  if (n_grid.empty() == tick_grid.empty())
    throw std::invalid_argument("exactly one of n_grid and tick_grid must be given");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (!(n_grid[i] > n_grid[i - 1])) throw std::invalid_argument("n_grid must be strictly increasing");
  if (!tick_grid.empty()) {
    if (scenario.sampling.kind != SamplingSpec::Kind::Hbt)
      throw std::invalid_argument("tick_grid needs hbt sampling");
    for (double t : tick_grid)
      if (!(t > 0.0)) throw std::invalid_argument("tick sizes must be positive");
  }
  if (workers == 0) throw std::invalid_argument("workers must be at least 1");
  scenario.validate();
  const bool pair = estimator.name == "hayashi_yoshida";
  if (pair && scenario.n_assets() != 2)
    throw std::invalid_argument("hayashi_yoshida needs a two-asset scenario");
  if (is_theta(estimator.name)) {
    if (scenario.noise.impact.is_zero())
      throw std::invalid_argument(estimator.name + " needs a noise model with parameters");
    if (theta_method(estimator.name) == FitMethod::LR && !scenario.noise.impact.is_linear())
      throw std::invalid_argument("theta_lr needs a linear impact function");
  }
  if (fit_method == FitMethod::LR && !scenario.noise.impact.is_linear())
    throw std::invalid_argument("fit method LR needs a linear impact function");
  if (estimator.name == "vol_of_vol" && scenario.has_jumps() &&
      !estimator.params.value("allow_jumps", false))
    throw std::invalid_argument(
        "vol_of_vol assumes continuous paths; set params.allow_jumps to run it on a jump scenario");
  if (truth == TruthMode::ClosedForm) {
    if (estimator.name == "jump_variation")
      throw std::invalid_argument("jump_variation has no closed-form truth");
    if (!is_theta(estimator.name) && !constant_vol(scenario))
      throw std::invalid_argument("closed-form truth needs constant volatility");
  }
  for (const auto& c : checks) {
    if (!c.contains("kind")) throw std::invalid_argument("every check needs a kind");
    const auto kind = c.at("kind").get<std::string>();
    const auto& kinds = check_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw std::invalid_argument("unknown check kind '" + kind + "'");
  }
}

MarketScenario ExperimentPlan::scenario_at(std::size_t level) const {
  MarketScenario s = scenario;
  s.seed = seed_base;
  if (!n_grid.empty()) {
    const auto n = n_grid.at(level);
    if (s.sampling.kind == SamplingSpec::Kind::Poisson)
      s.sampling.rate = static_cast<double>(n) / s.horizon;
    else if (s.sampling.kind == SamplingSpec::Kind::Regular)
      s.sampling.n = n;
    else
      throw std::invalid_argument("n_grid needs regular or poisson sampling");
  } else {
    s.sampling.hbt.tick = tick_grid.at(level);
  }
  return s;
}

//---------------------------------------------------------------------------
// Running
//---------------------------------------------------------------------------
ReplicationOutcome run_replication(const ExperimentPlan& plan, std::size_t level,
                                   std::size_t replication) {
  ReplicationOutcome out;
  try {
    const MarketScenario sc = plan.scenario_at(level);
    const Realization r = simulate_market(sc, replication);
    out.truth = truth_of(plan, sc, r) + plan.truth_offset;
    out.increments = static_cast<double>(r.series[0].grid.increments());
    const auto& name = plan.estimator.name;
    const ImpactFunction& impact = sc.noise.impact;
    if (is_theta(name)) {
      const FittedNoise f = fit_noise(r.series[0], impact, sc.noise.domain, theta_method(name));
      out.estimate = f.theta_hat[0];
      out.ok = true;
      return out;
    }
    std::vector<std::vector<double>> plug, latent;
    std::vector<SamplingGrid> grids;
    const std::size_t used = name == "hayashi_yoshida" ? 2 : 1;
    for (std::size_t a = 0; a < used; ++a) {
      const FittedNoise f = fit_noise(r.series[a], impact, sc.noise.domain, plan.fit_method);
      plug.push_back(plugin_price(r.series[a], f));
      latent.push_back(r.latent_at_obs[a]);
      grids.push_back(r.series[a].grid);
    }
    EstimateReport rep = apply(plan, plug, grids);
    out.estimate = rep.xi_hat;
    out.scale = rep.scale;
    out.avar = rep.ci95 ? rep.avar_hat : 0.0;
    if (rep.ci95) out.covered = rep.ci95->first <= out.truth && out.truth <= rep.ci95->second;
    rep.studentize(out.truth);
    out.student = rep.student_stat;
    out.oracle = apply(plan, latent, grids).xi_hat;
    out.avar_oracle = avar_oracle_of(plan, sc, r);
    out.ok = std::isfinite(out.estimate);
    if (!out.ok) out.error = "non-finite estimate";
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

McSummary run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const std::size_t levels = plan.levels();
  const std::size_t reps = plan.replications;
  const std::size_t jobs = levels * reps;
  std::vector<ReplicationOutcome> outcomes(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs; j = next.fetch_add(1))
      outcomes[j] = run_replication(plan, j / reps, j % reps);
  };
  const std::size_t n_workers = std::min(plan.workers, jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  McSummary s;
  s.name = plan.name;
  s.estimator = plan.estimator.name;
  const bool ticks = !plan.tick_grid.empty();
  for (std::size_t l = 0; l < levels; ++l) {
    const std::vector<ReplicationOutcome> slice(outcomes.begin() + static_cast<std::ptrdiff_t>(l * reps),
                                                outcomes.begin() + static_cast<std::ptrdiff_t>((l + 1) * reps));
    const double level = ticks ? plan.tick_grid[l] : static_cast<double>(plan.n_grid[l]);
    s.levels.push_back(aggregate(level, slice));
    const auto& ls = s.levels.back();
    if (static_cast<double>(ls.failures) > 0.1 * static_cast<double>(reps)) {
      s.flags.push_back("failures_exceeded:level" + std::to_string(l));
      s.pass = false;
    }
    if (plan.keep_traces) {
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& o = slice[r];
        if (!o.ok) continue;
        s.traces.push_back({level, r, "estimate", o.estimate});
        s.traces.push_back({level, r, "truth", o.truth});
        if (o.oracle) s.traces.push_back({level, r, "oracle", *o.oracle});
        if (o.student) s.traces.push_back({level, r, "student", *o.student});
      }
    }
  }
  if (levels >= 3) {
    const auto fit = rate_slope(s);
    s.rate_slope = fit.slope;
    s.rate_slope_se = fit.stderr_;
    for (const auto& f : fit.flags) s.flags.push_back(f);
  }
  for (const auto& c : plan.checks) {
    s.checks.push_back(evaluate_check(c, s, ticks));
    if (!s.checks.back().pass) s.pass = false;
  }
  return s;
}

SlopeFit rate_slope(const std::vector<double>& n, const std::vector<double>& rmse) {
  if (n.size() != rmse.size()) throw std::invalid_argument("rate_slope: length mismatch");
  SlopeFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(rmse[i] > 0.0) || !(n[i] > 0.0)) {
      fit.flags.push_back("dropped_level:" + std::to_string(i));
      continue;
    }
    lx.push_back(std::log(n[i]));
    ly.push_back(std::log(rmse[i]));
  }
  if (lx.size() < 2) {
    if (n.size() < 3) throw std::invalid_argument("rate_slope needs at least 3 levels");
    throw std::invalid_argument("rate_slope: fewer than 2 usable levels");
  }
  if (n.size() < 3) throw std::invalid_argument("rate_slope needs at least 3 levels");
  const double m = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("rate_slope: levels do not vary");
  fit.slope = sxy / sxx;
  if (lx.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double e = ly[i] - my - fit.slope * (lx[i] - mx);
      rss += e * e;
    }
    fit.stderr_ = std::sqrt(rss / (m - 2.0) / sxx);
  }
  return fit;
}

SlopeFit rate_slope(const McSummary& summary) {
  std::vector<double> n, rmse;
  for (const auto& l : summary.levels) {
    n.push_back(l.mean_increments > 0.0 ? l.mean_increments : l.level);
    rmse.push_back(l.rmse);
  }
  return rate_slope(n, rmse);
}

//---------------------------------------------------------------------------
// JSON
//---------------------------------------------------------------------------
nlohmann::json to_json(const ExperimentPlan& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["scenario"] = to_json(p.scenario);
  j["estimator"] = {{"name", p.estimator.name}, {"params", p.estimator.params}};
  if (!p.n_grid.empty()) j["n_grid"] = p.n_grid;
  if (!p.tick_grid.empty()) j["tick_grid"] = p.tick_grid;
  j["replications"] = p.replications;
  j["seed_base"] = p.seed_base;
  j["truth"] = p.truth == TruthMode::FineGrid ? "fine_grid" : "closed_form";
  j["truth_offset"] = p.truth_offset;
  j["fit_method"] = to_string(p.fit_method);
  j["workers"] = p.workers;
  j["checks"] = p.checks;
  j["keep_traces"] = p.keep_traces;
  return j;
}

ExperimentPlan plan_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys = {
      "name", "scenario", "estimator", "n_grid", "tick_grid", "replications", "seed_base",
      "truth", "truth_offset", "fit_method", "workers", "checks", "keep_traces"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw std::invalid_argument("unknown experiment key '" + k + "'");
  ExperimentPlan p;
  p.name = j.value("name", p.name);
  if (j.contains("scenario")) p.scenario = scenario_from_json(j.at("scenario"));
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    if (e.is_string()) {
      p.estimator.name = e.get<std::string>();
    } else {
      p.estimator.name = e.at("name").get<std::string>();
      if (e.contains("params")) p.estimator.params = e.at("params");
    }
  }
  if (j.contains("n_grid")) p.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  if (j.contains("tick_grid")) p.tick_grid = j.at("tick_grid").get<std::vector<double>>();
  p.replications = j.value("replications", p.replications);
  p.seed_base = j.value("seed_base", p.seed_base);
  const auto truth = j.value("truth", std::string("fine_grid"));
  if (truth == "fine_grid") p.truth = TruthMode::FineGrid;
  else if (truth == "closed_form") p.truth = TruthMode::ClosedForm;
  else throw std::invalid_argument("truth must be fine_grid or closed_form, got '" + truth + "'");
  p.truth_offset = j.value("truth_offset", 0.0);
  p.fit_method = fit_method_from_string(j.value("fit_method", std::string("LR")));
  p.workers = j.value("workers", p.workers);
  if (j.contains("checks")) p.checks = j.at("checks");
  p.keep_traces = j.value("keep_traces", false);
  return p;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const McSummary& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["estimator"] = s.estimator;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : s.levels) {
    j["levels"].push_back({{"level", l.level},
                           {"mean_increments", l.mean_increments},
                           {"replications", l.replications},
                           {"failures", l.failures},
                           {"mean_estimate", l.mean_estimate},
                           {"mean_truth", l.mean_truth},
                           {"bias", l.bias},
                           {"rmse", l.rmse},
                           {"mean_error_se", l.mean_error_se},
                           {"median_rel_error", l.median_rel_error},
                           {"coverage95", opt(l.coverage95)},
                           {"ks_stat", opt(l.ks_stat)},
                           {"ks_p", opt(l.ks_p)},
                           {"median_plugin_oracle_gap", opt(l.median_plugin_oracle_gap)},
                           {"median_avar_ratio", opt(l.median_avar_ratio)},
                           {"errors", l.errors}});
  }
  j["rate_slope"] = opt(s.rate_slope);
  j["rate_slope_se"] = opt(s.rate_slope_se);
  j["checks"] = nlohmann::json::array();
  for (const auto& c : s.checks)
    j["checks"].push_back(
        {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"detail", c.detail}});
  j["flags"] = s.flags;
  j["pass"] = s.pass;
  if (!s.traces.empty()) {
    auto& t = j["traces"] = nlohmann::json::array();
    for (const auto& r : s.traces) t.push_back({r.level, r.replication, r.statistic, r.value});
  }
  return j;
}

}  // namespace plugvol
