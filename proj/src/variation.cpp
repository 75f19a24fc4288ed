#include "plugvol/variation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace plugvol {

namespace {

void check_lengths(std::span<const double> x, const SamplingGrid& grid, std::size_t min_obs,
                   const char* what) {
  if (x.size() != grid.size())
    throw std::invalid_argument(std::string(what) + ": price and grid lengths differ");
  if (x.size() < min_obs)
    throw std::invalid_argument(std::string(what) + ": needs at least " +
                                std::to_string(min_obs) + " observations");
}

}  // namespace

TruncationRule TruncationRule::automatic(std::span<const double> x, const SamplingGrid& grid,
                                         bool per_gap, double omega_bar) {
  TruncationRule r;
  r.omega_bar = omega_bar;
  r.per_gap = per_gap;
  r.alpha = 4.0 * std::sqrt(std::max(0.0, bipower(x)) / grid.horizon);
  return r;
}

TruncationRule TruncationRule::none() {
  TruncationRule r;
  r.alpha = std::numeric_limits<double>::infinity();
  return r;
}

double TruncationRule::threshold(double gap) const { return alpha * std::pow(gap, omega_bar); }

double TruncationRule::threshold_at(const SamplingGrid& grid, std::size_t i) const {
  return threshold(per_gap ? grid.gap(i) : grid.mean_gap());
}

void TruncationRule::validate_for_rv(double activity_index) const {
  const double lo = 1.0 / (2.0 * (2.0 - activity_index));
  if (!(omega_bar > lo && omega_bar < 0.5))
    throw std::invalid_argument("threshold RV needs omega_bar in (" + std::to_string(lo) +
                                ", 0.5), got " + std::to_string(omega_bar));
  if (!(alpha > 0.0)) throw std::invalid_argument("truncation alpha must be positive");
}

void TruncationRule::validate_for_bipower() const {
  if (!(omega_bar > 0.0 && omega_bar < 0.5))
    throw std::invalid_argument("bipower needs omega_bar in (0, 0.5)");
  if (!(alpha > 0.0)) throw std::invalid_argument("truncation alpha must be positive");
}

BlockPlan BlockPlan::make(std::size_t n_increments, double beta) {
  if (!(beta > 0.5 && beta < 1.0)) throw std::invalid_argument("block exponent beta must lie in (1/2, 1)");
  if (n_increments == 0) throw std::invalid_argument("block plan needs increments");
  BlockPlan p;
  p.beta = beta;
  p.h = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n_increments), beta))));
  p.blocks = (n_increments + p.h - 1) / p.h;
  return p;
}

double realized_variance(std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    acc += d * d;
  }
  return acc;
}

double threshold_rv(std::span<const double> x, const SamplingGrid& grid,
                    const TruncationRule& rule) {
  check_lengths(x, grid, 2, "threshold_rv");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    if (std::abs(d) <= rule.threshold_at(grid, i)) acc += d * d;
  }
  return acc;
}

RvBiasVariance rv_bias_variance(std::span<const double> x, const SamplingGrid& grid,
                                const TruncationRule& rule, const BlockPlan& plan) {
  check_lengths(x, grid, 2, "rv_bias_variance");
  const std::size_t n = grid.increments();
  if (n < 2 * plan.h)
    throw std::invalid_argument("rv_bias_variance needs N >= 2h (N = " + std::to_string(n) +
                                ", h = " + std::to_string(plan.h) + ")");
  RvBiasVariance out;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  double fourth = 0.0;
  double ab_sq = 0.0;
  for (std::size_t b = 0; b < plan.blocks; ++b) {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t i = plan.first(b); i <= plan.last(b, n); ++i) {
      const double d = x[i] - x[i - 1];
      if (std::abs(d) > rule.threshold_at(grid, i)) continue;
      const double d2 = d * d;
      s1 += d;
      s2 += d2;
      s3 += d2 * d;
      fourth += d2 * d2;
    }
    if (s2 == 0.0) {
      ++out.skipped_blocks;
      continue;
    }
    const double v_sigma = sqrt_n * s3 / s2;
    const double ab_i = (2.0 / 3.0) * v_sigma * s1;
    out.ab += ab_i;
    ab_sq += ab_i * ab_i;
  }
  if (out.skipped_blocks > 0)
    out.flags.push_back("blocks_skipped:" + std::to_string(out.skipped_blocks));
  out.avar = (2.0 * static_cast<double>(n) / 3.0) * fourth - ab_sq;
  if (!(out.avar > 0.0)) {
    out.avar = 1e-12;
    out.clamped = true;
    out.flags.push_back("avar_clamped");
  }
  return out;
}

double bipower(std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 2; i < x.size(); ++i)
    acc += std::abs(x[i] - x[i - 1]) * std::abs(x[i - 1] - x[i - 2]);
  return 0.5 * std::numbers::pi * acc;
}

double threshold_bipower(std::span<const double> x, const SamplingGrid& grid,
                         const TruncationRule& rule) {
  check_lengths(x, grid, 3, "threshold_bipower");
  if (!grid.regular) throw std::invalid_argument("threshold_bipower needs a regular grid");
  const double w = rule.threshold(grid.mean_gap());
  auto kept = [w](double d) { return std::abs(d) <= w ? std::abs(d) : 0.0; };
  double acc = 0.0;
  double prev = kept(x[1] - x[0]);
  for (std::size_t i = 2; i < x.size(); ++i) {
    const double cur = kept(x[i] - x[i - 1]);
    acc += cur * prev;
    prev = cur;
  }
  return 0.5 * std::numbers::pi * acc;
}

double bipower_avar(double quarticity, double horizon) {
  constexpr double pi = std::numbers::pi;
  return (pi * pi / 4.0) * (1.0 + 4.0 / pi - 12.0 / (pi * pi)) * horizon * quarticity;
}

namespace {

void check_hy(std::span<const double> x1, const SamplingGrid& g1, std::span<const double> x2,
              const SamplingGrid& g2) {
  if (g1.times.empty() || g2.times.empty())
    throw std::invalid_argument("hayashi_yoshida: empty grid");
  if (x1.size() != g1.size() || x2.size() != g2.size())
    throw std::invalid_argument("hayashi_yoshida: price and grid lengths differ");
  if (g1.times.front() != 0.0 || g2.times.front() != 0.0)
    throw std::invalid_argument("hayashi_yoshida: grids must start at 0");
}

}  // namespace

double hayashi_yoshida(std::span<const double> x1, const SamplingGrid& g1,
                       std::span<const double> x2, const SamplingGrid& g2) {
  check_hy(x1, g1, x2, g2);
  const auto& t1 = g1.times;
  const auto& t2 = g2.times;
  const std::size_t n1 = t1.size() - 1;
  const std::size_t n2 = t2.size() - 1;
  double acc = 0.0;
  std::size_t j0 = 1;
  for (std::size_t i = 1; i <= n1; ++i) {
    const double a = t1[i - 1];
    const double b = t1[i];
    // Intervals of asset 2 ending at or before a never meet [a, b) or later ones.
    while (j0 <= n2 && t2[j0] <= a) ++j0;
    const double dx1 = x1[i] - x1[i - 1];
    for (std::size_t j = j0; j <= n2 && t2[j - 1] < b; ++j) acc += dx1 * (x2[j] - x2[j - 1]);
  }
  return acc;
}

double hayashi_yoshida_one_sided(std::span<const double> x1, const SamplingGrid& g1,
                                 std::span<const double> x2, const SamplingGrid& g2) {
  check_hy(x1, g1, x2, g2);
  const auto& t1 = g1.times;
  const auto& t2 = g2.times;
  const std::size_t last2 = t2.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 1; i < t1.size(); ++i) {
    // t^- = max{t2 <= t1[i-1]},  t^+ = min{t2 >= t1[i]} capped at the last time.
    const auto lo = static_cast<std::size_t>(
        std::upper_bound(t2.begin(), t2.end(), t1[i - 1]) - t2.begin() - 1);
    auto hi = static_cast<std::size_t>(std::lower_bound(t2.begin(), t2.end(), t1[i]) - t2.begin());
    hi = std::min(hi, last2);
    if (hi <= lo) continue;
    acc += (x1[i] - x1[i - 1]) * (x2[hi] - x2[lo]);
  }
  return acc;
}

}  // namespace plugvol
