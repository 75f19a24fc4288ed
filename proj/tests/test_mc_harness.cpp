#include "plugvol/mc_harness.hpp"
#include "plugvol/scenario_io.hpp"

#include <doctest.h>

#include <cmath>

using namespace plugvol;

namespace {

ExperimentPlan brownian_rv_plan() {
  ExperimentPlan p;
  p.name = "rv";
  p.scenario.assets[0].vol = VolSpec::constant(0.01 / std::sqrt(p.scenario.horizon));
  p.estimator.name = "threshold_rv";
  p.estimator.params = {{"beta", 0.9}};
  p.n_grid = {2000};
  p.replications = 50;
  p.seed_base = 17;
  return p;
}

bool has(const std::vector<std::string>& v, const std::string& prefix) {
  for (const auto& s : v)
    if (s.rfind(prefix, 0) == 0) return true;
  return false;
}

}  // namespace

TEST_CASE("coverage of threshold RV on a constant-vol Brownian path") {
  const auto s = run_experiment(brownian_rv_plan());
  REQUIRE(s.levels.size() == 1);
  const auto& lv = s.levels[0];
  REQUIRE(lv.coverage95.has_value());
  CHECK(*lv.coverage95 >= 0.86);
  CHECK(*lv.coverage95 <= 1.0);
  CHECK(lv.rmse >= std::abs(lv.bias));
  CHECK(lv.failures == 0);
}

TEST_CASE("shifted truth destroys coverage") {
  auto p = brownian_rv_plan();
  p.truth_offset = 1.0;
  const auto s = run_experiment(p);
  CHECK(*s.levels[0].coverage95 == 0.0);
}

TEST_CASE("summaries are identical across runs and worker counts") {
  auto p = brownian_rv_plan();
  p.keep_traces = true;
  const auto a = to_json(run_experiment(p)).dump();
  const auto b = to_json(run_experiment(p)).dump();
  p.workers = 3;
  const auto c = to_json(run_experiment(p)).dump();
  CHECK(a == b);
  CHECK(a == c);
  p.seed_base = 18;
  CHECK(to_json(run_experiment(p)).dump() != a);
}

TEST_CASE("replications draw distinct, reproducible streams") {
  auto p = brownian_rv_plan();
  const auto r0 = run_replication(p, 0, 0);
  const auto r1 = run_replication(p, 0, 1);
  REQUIRE(r0.ok);
  REQUIRE(r1.ok);
  CHECK(r0.estimate != r1.estimate);
  const auto again = run_replication(p, 0, 1);
  CHECK(again.estimate == r1.estimate);
}

TEST_CASE("rate slope on exact power laws") {
  const std::vector<double> n = {500, 2000, 8000, 32000};
  std::vector<double> half, one;
  for (double v : n) {
    half.push_back(3.0 / std::sqrt(v));
    one.push_back(0.2 / v);
  }
  CHECK(rate_slope(n, half).slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(rate_slope(n, one).slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(rate_slope(n, one).stderr_ == doctest::Approx(0.0).epsilon(1e-9));

  auto with_zero = one;
  with_zero[1] = 0.0;
  const auto fit = rate_slope(n, with_zero);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(fit.flags == std::vector<std::string>{"dropped_level:1"});

  CHECK_THROWS(rate_slope({500, 2000}, {0.1, 0.05}));
}

TEST_CASE("plan validation") {
  auto p = brownian_rv_plan();
  CHECK_NOTHROW(p.validate());

  p.replications = 10;
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("at least 50"));
  p = brownian_rv_plan();

  p.estimator.name = "garch";
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("threshold_rv"));
  p = brownian_rv_plan();

  p.n_grid = {2000, 1000};
  CHECK_THROWS(p.validate());
  p = brownian_rv_plan();

  p.tick_grid = {1e-4};
  CHECK_THROWS(p.validate());
  p = brownian_rv_plan();

  p.estimator.name = "hayashi_yoshida";
  CHECK_THROWS(p.validate());
  p = brownian_rv_plan();

  p.estimator.name = "theta_lr";
  CHECK_THROWS(p.validate());
  p = brownian_rv_plan();

  p.estimator.name = "vol_of_vol";
  p.scenario.assets[0].jumps = JumpSpec::compound_poisson(1e-3, 0.0, 0.01);
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("allow_jumps"));
  p.estimator.params = {{"allow_jumps", true}};
  CHECK_NOTHROW(p.validate());
  p = brownian_rv_plan();

  p.checks = nlohmann::json::array({{{"kind", "vibes"}}});
  CHECK_THROWS(p.validate());
}

TEST_CASE("fine-grid truth agrees with the closed form for constant volatility") {
  for (const char* est : {"threshold_rv", "quarticity"}) {
    auto p = brownian_rv_plan();
    p.estimator.name = est;
    p.estimator.params = nlohmann::json::object();
    const auto fine = run_replication(p, 0, 3);
    p.truth = TruthMode::ClosedForm;
    const auto closed = run_replication(p, 0, 3);
    REQUIRE(fine.ok);
    REQUIRE(closed.ok);
    CHECK(fine.truth == doctest::Approx(closed.truth).epsilon(1e-3));
  }
}

TEST_CASE("checks evaluate against level summaries") {
  auto p = brownian_rv_plan();
  p.checks = nlohmann::json::array({
      {{"kind", "coverage"}, {"min", 0.86}, {"max", 1.0}},
      {{"kind", "mean_error"}, {"max_se", 1e-9}},
  });
  const auto s = run_experiment(p);
  REQUIRE(s.checks.size() == 2);
  CHECK(s.checks[0].pass);
  CHECK_FALSE(s.checks[1].pass);
  CHECK_FALSE(s.pass);
}

TEST_CASE("rate experiment for the noise parameter") {
  ExperimentPlan p;
  p.name = "theta";
  p.scenario.assets[0].vol = VolSpec::constant(0.01 / std::sqrt(p.scenario.horizon));
  p.scenario.noise.impact = ImpactFunction::linear(1);
  p.scenario.noise.theta = Eigen::VectorXd::Constant(1, 1e-4);
  p.scenario.noise.domain = ParamBox::symmetric(1, 0.01);
  p.scenario.covariates = {CovariateSpec::trade_sign()};
  p.estimator.name = "theta_qmle";
  p.n_grid = {500, 2000, 8000};
  p.replications = 60;
  const auto s = run_experiment(p);
  REQUIRE(s.rate_slope.has_value());
  CHECK(*s.rate_slope >= -1.15);
  CHECK(*s.rate_slope <= -0.85);
}

TEST_CASE("plan JSON round trip and unknown keys") {
  auto p = brownian_rv_plan();
  p.checks = nlohmann::json::array({{{"kind", "ks"}, {"p_min", 0.01}}});
  const auto j = to_json(p);
  const auto back = plan_from_json(j);
  CHECK(to_json(back) == j);
  auto bad = j;
  bad["replicates"] = 100;
  CHECK_THROWS_WITH(plan_from_json(bad), doctest::Contains("replicates"));
  auto short_form = j;
  short_form["estimator"] = "bipower";
  CHECK(plan_from_json(short_form).estimator.name == "bipower");
}

TEST_CASE("failed replications are recorded, not fatal") {
  auto p = brownian_rv_plan();
  p.estimator.params = {{"beta", 0.9}, {"omega_bar", 0.1}};  // inadmissible
  const auto s = run_experiment(p);
  CHECK(s.levels[0].failures == 50);
  CHECK_FALSE(s.levels[0].errors.empty());
  CHECK_FALSE(s.pass);
  CHECK(has(s.flags, "failures_exceeded"));
}
