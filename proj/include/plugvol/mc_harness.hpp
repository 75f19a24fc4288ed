// Replicated Monte Carlo experiments: simulate, fit the noise, run a plug-in
// estimator, compare with the per-path truth and aggregate per sampling level.
//
// Replication r of every level draws from the streams keyed by
// (seed_base, r), so summaries do not depend on the worker count or on the
// order in which replications finish.
#pragma once

#include "plugvol/ks.hpp"
#include "plugvol/noise_fit.hpp"
#include "plugvol/plugin.hpp"
#include "plugvol/simulator.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace plugvol {

// Names accepted in ExperimentPlan::estimator.
const std::vector<std::string>& estimator_names();

struct EstimatorChoice {
  std::string name = "threshold_rv";
  // Tuning: beta, omega_bar, alpha (threshold_rv, bipower); k, k_exponent
  // (identity, quarticity); c, k, allow_jumps (vol_of_vol).
  nlohmann::json params = nlohmann::json::object();
};

enum class TruthMode { FineGrid, ClosedForm };

struct ExperimentPlan {
  std::string name = "experiment";
  MarketScenario scenario;
  EstimatorChoice estimator;
  // Exactly one of the two level lists is used: regular sample sizes or
  // HBT tick sizes.
  std::vector<std::size_t> n_grid;
  std::vector<double> tick_grid;
  std::size_t replications = 200;
  std::uint64_t seed_base = 1;
  TruthMode truth = TruthMode::FineGrid;
  double truth_offset = 0.0;  // added to every per-path truth
  FitMethod fit_method = FitMethod::LR;
  std::size_t workers = 1;
  nlohmann::json checks = nlohmann::json::array();
  bool keep_traces = false;

  std::size_t levels() const { return n_grid.empty() ? tick_grid.size() : n_grid.size(); }
  // Throws std::invalid_argument naming the first violated rule.
  void validate() const;
  // Scenario of one level (sample size or tick size substituted).
  MarketScenario scenario_at(std::size_t level) const;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string error;
  double estimate = 0.0;
  double truth = 0.0;
  std::optional<double> oracle;       // same estimator on the latent X
  double scale = 1.0;
  double avar = 0.0;
  std::optional<double> avar_oracle;  // population AVAR from the latent path
  std::optional<double> student;
  std::optional<bool> covered;
  double increments = 0.0;
};

struct LevelSummary {
  double level = 0.0;  // n or tick size
  double mean_increments = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double mean_estimate = 0.0;
  double mean_truth = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double mean_error_se = 0.0;
  double median_rel_error = 0.0;
  std::optional<double> coverage95;
  std::optional<double> ks_stat;
  std::optional<double> ks_p;
  std::optional<double> median_plugin_oracle_gap;  // scale |plug-in - oracle| / sqrt(avar oracle)
  std::optional<double> median_avar_ratio;         // median of avar_hat / avar oracle
  std::vector<std::string> errors;                 // first few failure messages
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
};

struct TraceRow {
  double level = 0.0;
  std::size_t replication = 0;
  std::string statistic;
  double value = 0.0;
};

struct McSummary {
  std::string name;
  std::string estimator;
  std::vector<LevelSummary> levels;
  std::optional<double> rate_slope;
  std::optional<double> rate_slope_se;
  std::vector<CheckResult> checks;
  std::vector<std::string> flags;
  bool pass = true;
  std::vector<TraceRow> traces;
};

// One replication at one level. Exceptions are caught and recorded.
ReplicationOutcome run_replication(const ExperimentPlan& plan, std::size_t level,
                                   std::size_t replication);

McSummary run_experiment(const ExperimentPlan& plan);

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  std::vector<std::string> flags;
};

// Least-squares slope of log rmse against log n (mean increments per level).
SlopeFit rate_slope(const McSummary& summary);
SlopeFit rate_slope(const std::vector<double>& n, const std::vector<double>& rmse);

nlohmann::json to_json(const ExperimentPlan& p);
ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const McSummary& s);

}  // namespace plugvol
