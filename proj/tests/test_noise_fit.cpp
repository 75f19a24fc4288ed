#include "plugvol/noise_fit.hpp"
#include "plugvol/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace plugvol;

namespace {

ObservedSeries from_rows(std::vector<double> z, const std::vector<std::vector<double>>& q) {
  ObservedSeries s;
  s.grid = SamplingGrid::make_regular(z.size() - 1, static_cast<double>(z.size() - 1));
  s.z = std::move(z);
  s.q = CovariateMatrix(static_cast<Eigen::Index>(q.size()), static_cast<Eigen::Index>(q[0].size()));
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q[i].size(); ++j) s.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q[i][j];
  return s;
}

MarketScenario roll_scenario(std::size_t n, std::size_t dim = 1) {
  MarketScenario sc;
  sc.horizon = 23400.0;
  sc.assets[0].vol = VolSpec::constant(0.01 / std::sqrt(23400.0));
  sc.noise.impact = ImpactFunction::linear(dim);
  sc.noise.theta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 1e-4);
  sc.noise.domain = ParamBox::symmetric(dim, 0.01);
  sc.covariates = {CovariateSpec::trade_sign(0.3)};
  if (dim > 1) sc.covariates.push_back(CovariateSpec::volume());
  sc.sampling = SamplingSpec::regular(n);
  return sc;
}

double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace

TEST_CASE("LR: hand-solved normal equations") {
  // dz = (0.01, -0.01, 0.02), dq = (1, -1, 2): theta = 0.06 / 6
  const auto s = from_rows({0.0, 0.01, 0.0, 0.02}, {{0}, {1}, {0}, {2}});
  const auto f = fit_lr(s, ImpactFunction::linear(1));
  CHECK(f.theta_hat[0] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(f.flags.empty());
}

TEST_CASE("LR: noiseless contamination is recovered exactly") {
  MarketScenario sc;
  sc.assets[0].vol = VolSpec::constant(0.0);
  sc.noise.impact = ImpactFunction::linear(1);
  sc.noise.theta = Eigen::VectorXd::Constant(1, 0.005);
  sc.noise.domain = ParamBox::symmetric(1, 1.0);
  sc.covariates = {CovariateSpec::alternating()};
  sc.sampling = SamplingSpec::regular(100);
  const auto s = simulate_market(sc, 0).series[0];
  const auto f = fit_lr(s, sc.noise.impact);
  CHECK(f.theta_hat[0] == doctest::Approx(0.005).epsilon(1e-14));
}

TEST_CASE("LR: constant covariate is singular and named") {
  const auto s = from_rows({0.0, 0.1, 0.3, 0.2, 0.4}, {{1, 1}, {-1, 1}, {1, 1}, {1, 1}, {-1, 1}});
  try {
    fit_lr(s, ImpactFunction::linear(2));
    FAIL("expected singular design");
  } catch (const SingularDesignError& e) {
    CHECK(e.column() == 1);
    CHECK(std::string(e.what()).find("q2") != std::string::npos);
  }
}

TEST_CASE("LR rejects nonlinear impact and degenerate data") {
  const auto s = from_rows({0.0, 0.1, 0.3}, {{1, 1}, {-1, 1}, {1, 1}});
  CHECK_THROWS_AS(fit_lr(s, ImpactFunction::spread_power()), std::invalid_argument);
  CHECK_THROWS_AS(fit_lr(s, ImpactFunction::linear(2)), std::invalid_argument);
}

TEST_CASE("LR, MSE and QMLE coincide on linear impact") {
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto sc = roll_scenario(2000, 2);
    const auto s = simulate_market(sc, r).series[0];
    const auto lr = fit_lr(s, sc.noise.impact);
    const auto mse = fit_mse(s, sc.noise.impact, sc.noise.domain);
    const auto qm = fit_qmle(s, sc.noise.impact, sc.noise.domain);
    CHECK(rel_diff(mse.theta_hat, lr.theta_hat) <= 1e-6);
    CHECK(rel_diff(qm.theta_hat, lr.theta_hat) <= 1e-6);
    CHECK(rel_diff(qm.theta_hat, mse.theta_hat) <= 1e-6);
    CHECK(qm.sigma2_hat > 0.0);
    CHECK(lr.condition_number >= 1.0);
  }
}

TEST_CASE("MSE and QMLE agree on the nonlinear impact") {
  MarketScenario sc = roll_scenario(4000);
  sc.noise.impact = ImpactFunction::spread_power();
  sc.noise.theta = Eigen::Vector2d(2e-4, 0.8);
  sc.noise.domain.lower = Eigen::Vector2d(-0.01, 0.0);
  sc.noise.domain.upper = Eigen::Vector2d(0.01, 2.0);
  sc.covariates = {CovariateSpec::trade_sign(), CovariateSpec::half_spread(2.0, 0.9, 0.3)};
  const auto s = simulate_market(sc, 1).series[0];
  const auto mse = fit_mse(s, sc.noise.impact, sc.noise.domain);
  const auto qm = fit_qmle(s, sc.noise.impact, sc.noise.domain);
  CHECK(mse.converged);
  CHECK(rel_diff(qm.theta_hat, mse.theta_hat) <= 1e-6);
  CHECK(mse.theta_hat[0] == doctest::Approx(2e-4).epsilon(0.05));
  CHECK(mse.theta_hat[1] == doctest::Approx(0.8).epsilon(0.1));
}

TEST_CASE("MSE: truth outside the box returns the boundary with a flag") {
  auto sc = roll_scenario(1000);
  const auto s = simulate_market(sc, 0).series[0];
  ParamBox box = ParamBox::symmetric(1, 5e-5);
  const auto f = fit_mse(s, sc.noise.impact, box);
  CHECK(f.theta_hat[0] == 5e-5);
  CHECK(has_flag(f.flags, "at_bound"));
  CHECK(box.contains(f.theta_hat));
}

TEST_CASE("pure Brownian prices: |theta_hat| <= 5/n in 95% of seeds") {
  MarketScenario sc;
  sc.horizon = 1.0;
  sc.assets[0].vol = VolSpec::constant(1.0);
  sc.noise.impact = ImpactFunction::none(1);
  sc.covariates = {CovariateSpec::trade_sign(0.5)};
  const std::size_t n = 500;
  sc.sampling = SamplingSpec::regular(n);
  int inside = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto s = simulate_market(sc, r).series[0];
    const auto f = fit_qmle(s, ImpactFunction::linear(1), ParamBox::symmetric(1, 1.0));
    if (std::abs(f.theta_hat[0]) <= 5.0 / static_cast<double>(n)) ++inside;
  }
  CHECK(inside >= 190);
}

TEST_CASE("fit is invariant to a price shift and scales with the covariate") {
  const auto sc = roll_scenario(1000, 2);
  auto s = simulate_market(sc, 3).series[0];
  const auto base = fit_lr(s, sc.noise.impact);
  auto shifted = s;
  for (auto& z : shifted.z) z += 0.37;
  CHECK(rel_diff(fit_lr(shifted, sc.noise.impact).theta_hat, base.theta_hat) <= 1e-9);
  auto scaled = s;
  scaled.q.col(1) *= 4.0;
  const auto f = fit_lr(scaled, sc.noise.impact);
  CHECK(f.theta_hat[0] == doctest::Approx(base.theta_hat[0]).epsilon(1e-9));
  CHECK(f.theta_hat[1] == doctest::Approx(base.theta_hat[1] / 4.0).epsilon(1e-9));
}

TEST_CASE("LR normal equations residual is small") {
  const auto sc = roll_scenario(3000, 2);
  const auto s = simulate_market(sc, 7).series[0];
  const auto f = fit_lr(s, sc.noise.impact);
  const auto n = static_cast<Eigen::Index>(s.size() - 1);
  Eigen::MatrixXd m(n, 2);
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.row(i) = s.q.row(i + 1) - s.q.row(i);
    dz[i] = s.z[static_cast<std::size_t>(i + 1)] - s.z[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd rhs = m.transpose() * dz;
  CHECK((m.transpose() * m * f.theta_hat - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("plug-in price") {
  auto sc = roll_scenario(2000);
  const auto real = simulate_market(sc, 2);
  const auto& s = real.series[0];

  FittedNoise exact;
  exact.impact = sc.noise.impact;
  exact.theta_hat = sc.noise.theta;
  const auto xe = plugin_price(s, exact);
  for (std::size_t i = 0; i < xe.size(); ++i) CHECK(std::abs(xe[i] - real.latent_at_obs[0][i]) <= 1e-15);

  FittedNoise zero;
  zero.impact = ImpactFunction::none(1);
  CHECK(plugin_price(s, zero) == s.z);

  const auto f = fit_lr(s, sc.noise.impact);
  const auto xh = plugin_price(s, f);
  const double bound = (f.theta_hat - sc.noise.theta).norm() * s.q.rowwise().norm().maxCoeff();
  double worst = 0.0;
  for (std::size_t i = 0; i < xh.size(); ++i)
    worst = std::max(worst, std::abs(xh[i] - real.latent_at_obs[0][i]));
  CHECK(worst <= bound * (1 + 1e-9) + 1e-15);

  FittedNoise wide = f;
  wide.impact = ImpactFunction::linear(3);
  wide.theta_hat = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(plugin_price(s, wide), SchemaError);
}

TEST_CASE("rate: RMSE shrinks like 1/n") {
  std::vector<double> lx, ly;
  for (std::size_t n : {500, 2000, 8000}) {
    const auto sc = roll_scenario(n);
    double se = 0.0;
    const int reps = 60;
    for (int r = 0; r < reps; ++r) {
      const auto f = fit_lr(simulate_market(sc, r).series[0], sc.noise.impact);
      se += std::pow(f.theta_hat[0] - 1e-4, 2);
    }
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(0.5 * std::log(se / reps));
  }
  CHECK((ly.back() - ly.front()) / (lx.back() - lx.front()) <= -0.85);
}

TEST_CASE("fitted noise JSON round trip") {
  const auto sc = roll_scenario(500, 2);
  const auto f = fit_qmle(simulate_market(sc, 0).series[0], sc.noise.impact, sc.noise.domain);
  const auto back = fitted_noise_from_json(to_json(f));
  CHECK(back.theta_hat == f.theta_hat);
  CHECK(back.method == FitMethod::QMLE);
  CHECK(back.sigma2_hat == f.sigma2_hat);
  CHECK(back.impact.name() == f.impact.name());
  CHECK(fit_method_from_string("MSE") == FitMethod::MSE);
  CHECK_THROWS(fit_method_from_string("OLS"));
}
