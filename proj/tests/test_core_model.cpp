#include "plugvol/core_model.hpp"
#include "plugvol/series_io.hpp"
#include "plugvol/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace plugvol;

namespace {

ObservedSeries three_points() {
  ObservedSeries s;
  s.grid.times = {0.0, 0.5, 1.0};
  s.grid.horizon = 1.0;
  s.z = {0.0, 0.01, -0.02};
  s.q = CovariateMatrix(3, 1);
  s.q << 1.0, -1.0, 1.0;
  return s;
}

bool contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("validate_series accepts a well-formed series") {
  CHECK(validate_series(three_points()).empty());
}

TEST_CASE("validate_series names the index of a time inversion") {
  auto s = three_points();
  s.grid.times = {0.0, 0.5, 0.4};
  const auto v = validate_series(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "times not increasing at 2");
}

TEST_CASE("validate_series reports non-finite covariates") {
  auto s = three_points();
  s.q(1, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_series(s);
  CHECK(contains(v, "non-finite covariate"));
  CHECK(contains(v, "at 1"));
}

TEST_CASE("validate_series checks lengths, start and regular gaps") {
  auto s = three_points();
  s.z.pop_back();
  CHECK(contains(validate_series(s), "z length"));

  s = three_points();
  s.grid.times = {0.1, 0.5, 1.0};
  CHECK(contains(validate_series(s), "first time not 0"));

  s = three_points();
  s.grid.times = {0.0, 0.4, 1.0};
  s.grid.regular = true;
  CHECK(contains(validate_series(s), "irregular gap"));

  s = three_points();
  s.grid.regular = true;
  CHECK(validate_series(s).empty());
}

TEST_CASE("regular grid has equal gaps T/n") {
  const auto g = SamplingGrid::make_regular(7, 23400.0);
  CHECK(g.size() == 8);
  CHECK(g.times.front() == 0.0);
  CHECK(g.times.back() == 23400.0);
  for (std::size_t i = 1; i < g.size(); ++i)
    CHECK(std::abs(g.gap(i) - g.mean_gap()) <= 1e-9 * g.mean_gap());
}

TEST_CASE("linear impact is theta^T q exactly") {
  const auto phi = ImpactFunction::linear(2);
  const std::vector<double> q = {0.3, -2.0};
  const std::vector<double> th = {0.005, 1.5};
  CHECK(phi.value(q, th) == 0.005 * 0.3 + 1.5 * -2.0);
  const auto g = phi.gradient(q, th);
  CHECK(g[0] == 0.3);
  CHECK(g[1] == -2.0);
  CHECK(phi.hessian(q, th).norm() == 0.0);
  CHECK(phi.is_linear());
}

TEST_CASE("spread_power derivatives match finite differences") {
  const auto phi = ImpactFunction::spread_power();
  const std::vector<double> q = {-1.0, 1.7};
  const std::vector<double> th = {0.004, 0.6};
  const auto g = phi.gradient(q, th);
  const auto h = phi.hessian(q, th);
  const double eps = 1e-6;
  for (int j = 0; j < 2; ++j) {
    auto tp = th, tm = th;
    tp[j] += eps;
    tm[j] -= eps;
    CHECK(g[j] == doctest::Approx((phi.value(q, tp) - phi.value(q, tm)) / (2 * eps)).epsilon(1e-6));
    const auto gp = phi.gradient(q, tp), gm = phi.gradient(q, tm);
    for (int k = 0; k < 2; ++k)
      CHECK(h(k, j) == doctest::Approx((gp[k] - gm[k]) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("impact names resolve") {
  CHECK(ImpactFunction::from_name("linear:3", 3).param_dim() == 3);
  CHECK(ImpactFunction::from_name("none", 2).is_zero());
  CHECK(ImpactFunction::from_name("spread_power", 2).param_dim() == 2);
  CHECK_THROWS_AS(ImpactFunction::from_name("cubic", 1), std::invalid_argument);
}

TEST_CASE("noise spec checks theta inside the box") {
  NoiseSpec n;
  n.impact = ImpactFunction::linear(1);
  n.theta = Eigen::VectorXd::Constant(1, 0.5);
  n.domain = ParamBox::symmetric(1, 0.1);
  CHECK_THROWS(n.validate());
  n.theta[0] = 0.05;
  CHECK_NOTHROW(n.validate());
}

TEST_CASE("estimate report: CI present iff avar positive, student stat scaling") {
  EstimateReport r;
  r.xi_hat = 2.0;
  r.ab_hat = 0.5;
  r.scale = 10.0;
  r.avar_hat = 4.0;
  r.finalize();
  REQUIRE(r.ci95.has_value());
  CHECK(r.ci95->first < r.ci95->second);
  CHECK((r.ci95->first + r.ci95->second) / 2 == doctest::Approx(1.95));
  r.studentize(1.0);
  REQUIRE(r.student_stat.has_value());
  CHECK(*r.student_stat == doctest::Approx(10.0 * (2.0 - 0.05 - 1.0) / 2.0));

  r.avar_hat = 0.0;
  r.finalize();
  CHECK_FALSE(r.ci95.has_value());
  r.studentize(1.0);
  CHECK_FALSE(r.student_stat.has_value());

  r.avar_hat = 1e-12;
  r.flags.push_back("avar_clamped");
  r.studentize(1.0);
  CHECK_FALSE(r.student_stat.has_value());
}

TEST_CASE("series CSV round trip is bit-identical") {
  MarketScenario sc;
  sc.noise.impact = ImpactFunction::linear(2);
  sc.noise.theta = Eigen::Vector2d(0.001, -0.0003);
  sc.noise.domain = ParamBox::symmetric(2, 0.01);
  sc.covariates = {CovariateSpec::trade_sign(), CovariateSpec::volume()};
  sc.sampling = SamplingSpec::poisson(0.05);
  const auto r = simulate_market(sc, 3);
  std::stringstream ss;
  write_series_csv(ss, r.series[0]);
  const auto back = read_series_csv(ss, {sc.horizon, 2});
  CHECK(back.grid.times == r.series[0].grid.times);
  CHECK(back.z == r.series[0].z);
  CHECK(back.q == r.series[0].q);
}

TEST_CASE("CSV reader names a missing covariate column") {
  std::stringstream ss("time,z\n0,0\n1,0.1\n");
  try {
    read_series_csv(ss, {std::nullopt, 1});
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("q1") != std::string::npos);
  }
}

TEST_CASE("latent path decomposition holds exactly at every node") {
  MarketScenario sc;
  sc.horizon = 1.0;
  sc.assets[0].vol = VolSpec::constant(0.2);
  sc.assets[0].jumps = JumpSpec::compound_poisson(20.0, 0.0, 0.05);
  const auto paths = simulate_latent(sc, 5000, 1);
  CHECK(!paths[0].jumps.empty());
  CHECK(paths[0].check_decomposition().empty());
  CHECK(paths[0].flag_large_increments().empty());
}

TEST_CASE("report JSON round trip") {
  EstimateReport r;
  r.estimator_name = "threshold_rv";
  r.xi_hat = 0.1;
  r.ab_hat = 0.01;
  r.avar_hat = 0.3;
  r.scale = 7.0;
  r.observations = 50;
  r.flags = {"a"};
  r.finalize();
  r.studentize(0.09);
  const auto back = report_from_json(to_json(r));
  CHECK(back.xi_hat == r.xi_hat);
  CHECK(back.ci95 == r.ci95);
  CHECK(back.student_stat == r.student_stat);
  CHECK(back.flags == r.flags);
}
