#include "plugvol/ks.hpp"
#include "plugvol/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

using namespace plugvol;

TEST_CASE("standard normal samples pass in at least 95% of repetitions") {
  int passes = 0;
  for (std::uint64_t m = 0; m < 100; ++m) {
    Engine rng(stream_key(77, m, Stream::Harness));
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(1000);
    for (auto& x : v) x = nd(rng);
    if (ks_normal(v).p_value > 0.01) ++passes;
  }
  CHECK(passes >= 95);
}

TEST_CASE("shifted or degenerate samples are rejected") {
  const std::vector<double> zeros(500, 0.0);
  const auto r = ks_normal(zeros);
  CHECK(r.statistic == doctest::Approx(0.5));
  CHECK(r.p_value < 1e-12);

  Engine rng(5);
  std::normal_distribution<double> nd(0.5, 1.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = nd(rng);
  CHECK(ks_normal(v).p_value < 1e-6);
}

TEST_CASE("input errors") {
  CHECK_THROWS_AS(ks_normal(std::vector<double>(10, 0.0)), std::invalid_argument);
  std::vector<double> v(200, 0.1);
  v[17] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ks_normal(v), std::invalid_argument);
  v[17] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ks_normal(v), std::invalid_argument);
}

TEST_CASE("KS distribution function") {
  CHECK(ks_cdf(10, 0.0) == 0.0);
  CHECK(ks_cdf(10, 1.0) == 1.0);
  // n = 1: D = max(U, 1 - U), so P(D < d) = 2d - 1 for d in [1/2, 1].
  CHECK(ks_cdf(1, 0.75) == doctest::Approx(0.5).epsilon(1e-9));
  // Asymptotic Kolmogorov quantiles.
  CHECK(ks_cdf(1000, 1.358 / std::sqrt(1000.0)) == doctest::Approx(0.95).epsilon(0.005));
  CHECK(ks_cdf(1000, 1.628 / std::sqrt(1000.0)) == doctest::Approx(0.99).epsilon(0.002));
  double prev = 0.0;
  for (double d = 0.01; d < 0.2; d += 0.01) {
    const double p = ks_cdf(300, d);
    CHECK(p >= prev);
    prev = p;
  }
}
