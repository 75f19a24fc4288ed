#include "plugvol/local.hpp"
#include "plugvol/plugin.hpp"
#include "plugvol/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace plugvol;

namespace {

FunctionalSpec untruncated(const Functional& g, std::size_t k) {
  FunctionalSpec s;
  s.g = g;
  s.k = k;
  s.rule = TruncationRule::none();
  return s;
}

std::vector<double> brownian(std::size_t n, double sigma, double horizon, std::uint64_t seed) {
  Engine rng(seed);
  std::normal_distribution<double> nd(0.0, sigma * std::sqrt(horizon / static_cast<double>(n)));
  std::vector<double> x(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) x[i] = x[i - 1] + nd(rng);
  return x;
}

std::vector<double> linear_path(std::size_t n, double a) {
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = a * static_cast<double>(i);
  return x;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("spot covariance of constant increments is c^2 / Delta") {
  const std::size_t n = 100;
  const auto g = SamplingGrid::make_regular(n, 2.0);
  const auto x = as_paths(linear_path(n, 0.03));
  const auto spec = untruncated(Functional::identity(), 10);
  for (std::size_t i : {1u, 50u, 91u})
    CHECK(spot_cov(x, g, i, spec)(0, 0) == doctest::Approx(0.0009 / 0.02).epsilon(1e-12));
  CHECK_THROWS_AS(spot_cov(x, g, 92, spec), std::out_of_range);
  CHECK_THROWS_AS(spot_cov(x, g, 0, spec), std::out_of_range);
}

TEST_CASE("fully truncated windows give the zero matrix") {
  const auto g = SamplingGrid::make_regular(50, 1.0);
  const auto x = as_paths(linear_path(50, 0.1));
  auto spec = untruncated(Functional::identity(), 5);
  spec.rule.alpha = 1e-6;
  spec.rule.omega_bar = 0.47;
  CHECK(spot_cov(x, g, 3, spec).norm() == 0.0);
}

TEST_CASE("spot covariance of duplicated assets is rank one") {
  const std::size_t n = 400;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  const auto x1 = brownian(n, 1.0, 1.0, 5);
  const auto x = stack_paths({x1, x1});
  const auto spec = untruncated(Functional::entry_product(2, 0, 1, 0, 1), 20);
  const auto c = spot_cov(x, g, 7, spec);
  CHECK(c(0, 1) == c(0, 0));
  CHECK(c(1, 0) == c(1, 1));
  CHECK(std::abs(c.determinant()) <= 1e-12 * c(0, 0) * c(0, 0));
}

TEST_CASE("spot covariance is symmetric and nonnegative definite") {
  const std::size_t n = 600;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  const auto x = stack_paths({brownian(n, 1.0, 1.0, 8), brownian(n, 0.5, 1.0, 9)});
  auto spec = untruncated(Functional::entry_product(2, 0, 0, 1, 1), 15);
  spec.rule.alpha = 3.0;
  for (std::size_t i = 1; i + spec.k - 1 <= n; i += 7) {
    const auto c = spot_cov(x, g, i, spec);
    CHECK(c(0, 1) == c(1, 0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, c.norm()));
  }
}

TEST_CASE("quarticity estimate equals Delta (1 - 2/k) sum c_i^2") {
  const std::size_t n = 3000;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  const auto x = as_paths(brownian(n, 0.7, 1.0, 21));
  const auto spec = untruncated(Functional::quarticity(), 17);
  double sum = 0.0;
  for (std::size_t i = 1; i + spec.k - 1 <= n; ++i) sum += std::pow(spot_cov(x, g, i, spec)(0, 0), 2);
  const double delta = 1.0 / static_cast<double>(n);
  CHECK(functional_estimate(x, g, spec) ==
        doctest::Approx(delta * (1.0 - 2.0 / 17.0) * sum).epsilon(1e-12));
}

TEST_CASE("identity functional: no correction, estimate near integrated variance") {
  const std::size_t n = 23400;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  const auto x = as_paths(brownian(n, 0.2, 1.0, 4));
  auto spec = FunctionalSpec::with_defaults(Functional::identity(), x, g);
  CHECK(bias_correction(Functional::identity(), Eigen::MatrixXd::Constant(1, 1, 0.3), spec.k) == 0.0);
  const auto res = evaluate_functional(x, g, spec);
  CHECK(res.estimate == doctest::Approx(0.04).epsilon(0.05));
  // Identity AVAR is the RV variance 2 T int sigma^4.
  CHECK(res.avar == doctest::Approx(2.0 * std::pow(0.2, 4)).epsilon(0.1));
}

TEST_CASE("hbar closed forms") {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(1, 1, 0.37);
  CHECK(hbar(Functional::quarticity(), c) == doctest::Approx(8.0 * std::pow(0.37, 4)));
  CHECK(hbar(Functional::identity(), c) == doctest::Approx(2.0 * 0.37 * 0.37));
  CHECK(bias_correction(Functional::quarticity(), c, 10) == doctest::Approx(2.0 * 0.37 * 0.37 / 10));
}

TEST_CASE("zero path gives zero estimate and variance") {
  const auto g = SamplingGrid::make_regular(300, 1.0);
  const auto x = as_paths(std::vector<double>(301, 0.0));
  const auto spec = untruncated(Functional::quarticity(), 10);
  const auto res = evaluate_functional(x, g, spec);
  CHECK(res.estimate == 0.0);
  CHECK(res.avar == 0.0);
}

TEST_CASE("functional requires n >= 3k and a regular grid") {
  auto g = SamplingGrid::make_regular(29, 1.0);
  const auto x = as_paths(brownian(29, 1.0, 1.0, 1));
  CHECK_THROWS(evaluate_functional(x, g, untruncated(Functional::quarticity(), 10)));
  g = SamplingGrid::make_regular(30, 1.0);
  const auto y = as_paths(brownian(30, 1.0, 1.0, 1));
  CHECK_NOTHROW(evaluate_functional(y, g, untruncated(Functional::quarticity(), 10)));
  g.regular = false;
  CHECK_THROWS(evaluate_functional(y, g, untruncated(Functional::quarticity(), 10)));
}

TEST_CASE("quarticity with default window: median within 5% of T sigma^4") {
  const std::size_t n = 23400;
  const double sigma = 0.02;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  std::vector<double> rel;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto x = as_paths(brownian(n, sigma, 1.0, 7000 + r));
    const auto spec = FunctionalSpec::with_defaults(Functional::quarticity(), x, g);
    rel.push_back(functional_estimate(x, g, spec) / std::pow(sigma, 4) - 1.0);
  }
  CHECK(std::abs(median(rel)) <= 0.05);
}

TEST_CASE("derivative gate and tuning checks") {
  auto spec = untruncated(Functional::quarticity(), 20);
  spec.rule.omega_bar = 0.47;
  CHECK(spec.check(2000).empty());
  CHECK(spec.check(100000).size() == 1);  // 20 < 100000^0.36
  CHECK(spec.check(100000)[0] == "k_outside_corridor");

  spec.rule.omega_bar = 0.3;  // below 5/12 for p = 3
  CHECK_THROWS(spec.check(2000));
  spec.rule.omega_bar = 0.47;
  spec.growth_p = 2;
  CHECK_THROWS(spec.check(2000));
  spec.growth_p = 3;

  Functional wrong("wrong", 1, [](const Eigen::MatrixXd& x) { return x(0, 0) * x(0, 0) * x(0, 0); },
                   [](const Eigen::MatrixXd& x) { return (2.0 * x).eval(); },
                   [](const Eigen::MatrixXd&) { return Eigen::MatrixXd::Constant(1, 1, 2.0).eval(); });
  CHECK(wrong.derivative_mismatch() > 1e-4);
  spec.g = wrong;
  CHECK_THROWS(spec.check(2000));

  for (const auto& f : {Functional::identity(), Functional::quarticity(),
                        Functional::entry_product(2, 0, 1, 1, 1), Functional::from_name("entry_product:0011")})
    CHECK(f.derivative_mismatch() <= 1e-4);
  CHECK_THROWS(Functional::from_name("cube"));
}

TEST_CASE("vol-of-vol on deterministic increments") {
  for (double horizon : {1.0, 23400.0}) {
    const std::size_t n = 400;
    const double a = 0.002;
    const auto g = SamplingGrid::make_regular(n, horizon);
    const auto plan = VolOfVolPlan::make(n, 1.0);
    REQUIRE(plan.k == 20);
    const double nn = n, kk = plan.k;
    const double unit = -2.0 * nn * nn * std::pow(a, 4) * (nn - 2 * kk + 1) / (kk * kk);
    CHECK(vol_of_vol(linear_path(n, a), g, plan) ==
          doctest::Approx(unit / (horizon * horizon)).epsilon(1e-10));
  }
}

TEST_CASE("vol-of-vol window errors") {
  CHECK_THROWS(VolOfVolPlan::make(4, 2.0));
  CHECK_THROWS(VolOfVolPlan::make(100, -1.0));
  VolOfVolPlan p;
  p.k = 50;
  const auto g = SamplingGrid::make_regular(100, 1.0);
  CHECK_THROWS(vol_of_vol(linear_path(100, 0.1), g, p));
}

TEST_CASE("vol-of-vol variance on a zero path is clamped") {
  const auto g = SamplingGrid::make_regular(400, 1.0);
  const auto res = vol_of_vol_avar(std::vector<double>(401, 0.0), g, VolOfVolPlan::make(400));
  CHECK(res.g1 == 0.0);
  CHECK(res.g2 == 0.0);
  CHECK(res.g3 == 0.0);
  CHECK(res.clamped);
  CHECK(res.avar == 1e-12);
  CHECK(has_flag(res.flags, "avar_clamped"));
  auto rep = vol_of_vol_report(std::vector<double>(401, 0.0), g);
  rep.studentize(0.0);
  CHECK_FALSE(rep.student_stat.has_value());
}

TEST_CASE("constant volatility: vol-of-vol is unbiased and its variance estimate calibrated") {
  const std::size_t n = 23400;
  const double sigma = 0.2;
  const auto g = SamplingGrid::make_regular(n, 1.0);
  const auto plan = VolOfVolPlan::make(n);
  double sum = 0.0, sum2 = 0.0;
  std::vector<double> ratio;
  const int reps = 200;
  const double oracle = vol_of_vol_avar_oracle(sigma, 0.0, 1.0, 1.0);
  for (int r = 0; r < reps; ++r) {
    const auto x = brownian(n, sigma, 1.0, 9100 + r);
    const double v = vol_of_vol(x, g, plan);
    sum += v;
    sum2 += v * v;
    ratio.push_back(vol_of_vol_avar(x, g, plan).avar / oracle);
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean) < 3 * se);
  CHECK(median(ratio) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("vol-of-vol oracle scales with the horizon") {
  CHECK(vol_of_vol_avar_oracle(0.1, 0.0, 1.0, 1.0) == doctest::Approx(48e-8));
  CHECK(vol_of_vol_avar_oracle(0.0, 2.0, 1.0, 3.0) == doctest::Approx(151.0 / 70.0 * 9.0 * 16.0));
  CHECK(vol_of_vol_avar_oracle(1.0, 1.0, 2.0, 1.0) ==
        doctest::Approx(48.0 / 16.0 + 12.0 / 4.0 + 151.0 / 70.0));
}

TEST_CASE("vol-of-vol mean increases with the true vol-of-vol") {
  const std::size_t n = 10000;
  std::vector<double> means;
  for (double xi : {0.0, 0.3, 0.8}) {
    MarketScenario sc;
    sc.horizon = 1.0;
    sc.assets[0].vol = VolSpec::heston(0.04, 5.0, 0.04, xi);
    sc.sampling = SamplingSpec::regular(n);
    sc.fine_steps = 2 * n;
    double sum = 0.0;
    for (std::uint64_t r = 0; r < 40; ++r) {
      const auto real = simulate_market(sc, r);
      sum += vol_of_vol(real.series[0].z, real.series[0].grid, VolOfVolPlan::make(n));
    }
    means.push_back(sum / 40);
  }
  CHECK(means[0] < means[1]);
  CHECK(means[1] < means[2]);
}

TEST_CASE("plug-in local estimators: zero impact and exact theta") {
  MarketScenario sc;
  sc.assets[0].vol = VolSpec::constant(0.01 / std::sqrt(sc.horizon));
  sc.noise.impact = ImpactFunction::linear(1);
  sc.noise.theta = Eigen::VectorXd::Constant(1, 1e-4);
  sc.noise.domain = ParamBox::symmetric(1, 0.01);
  sc.covariates = {CovariateSpec::trade_sign()};
  sc.sampling = SamplingSpec::regular(4000);
  const auto real = simulate_market(sc, 6);
  const auto& s = real.series[0];
  FittedNoise zero;
  zero.impact = ImpactFunction::none(1);
  const auto a = plugin_functional({s}, {zero});
  const auto b = functional_report(as_paths(s.z), s.grid);
  CHECK(a.xi_hat == b.xi_hat);
  CHECK(a.avar_hat == b.avar_hat);
  CHECK(plugin_vol_of_vol(s, zero).xi_hat == vol_of_vol_report(s.z, s.grid).xi_hat);

  FittedNoise exact;
  exact.impact = sc.noise.impact;
  exact.theta_hat = sc.noise.theta;
  const auto& x = real.latent_at_obs[0];
  FunctionalOptions fo;
  fo.rule = TruncationRule::automatic(x, s.grid, false);
  CHECK(plugin_functional({s}, {exact}, fo).xi_hat ==
        doctest::Approx(functional_report(as_paths(x), s.grid, fo).xi_hat).epsilon(1e-10));
  const auto vv = plugin_vol_of_vol(s, exact);
  CHECK(vv.xi_hat == doctest::Approx(vol_of_vol_report(x, s.grid).xi_hat).epsilon(1e-8));
  CHECK(vv.scale == doctest::Approx(std::sqrt(4000.0 / 63.0)));
}

TEST_CASE("vol-of-vol options resolve the window") {
  VolOfVolOptions o;
  CHECK_FALSE(o.allow_jumps);
  CHECK(o.resolve(1000).k == 31);
  o.k = 12;
  CHECK(o.resolve(1000).k == 12);
}
