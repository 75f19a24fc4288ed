// Truncated power variations on a price vector: threshold realized
// volatility with its block bias/variance estimators, threshold bipower
// variation and the Hayashi-Yoshida covariance estimator.
#pragma once

#include "plugvol/core_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace plugvol {

// Increments pass when |Delta_i X| <= w_i with w_i = alpha * (Delta_i t)^omega_bar
// (per_gap) or w = alpha * (T/N)^omega_bar.
struct TruncationRule {
  double alpha = 1.0;
  double omega_bar = 0.47;
  bool per_gap = true;

  // alpha = 4 sqrt(BV / T) from an untruncated bipower pass over x.
  static TruncationRule automatic(std::span<const double> x, const SamplingGrid& grid,
                                  bool per_gap = true, double omega_bar = 0.47);
  // Effectively no truncation.
  static TruncationRule none();

  double threshold(double gap) const;
  double threshold_at(const SamplingGrid& grid, std::size_t i) const;
  // omega_bar in (1/(2(2-r)), 1/2) for threshold RV with activity index r.
  void validate_for_rv(double activity_index = 0.0) const;
  // omega_bar in (0, 1/2).
  void validate_for_bipower() const;
};

struct BlockPlan {
  double beta = 0.6;
  std::size_t h = 0;       // block length floor(n^beta)
  std::size_t blocks = 0;  // B, with h (B - 1) < N <= h B

  static BlockPlan make(std::size_t n_increments, double beta = 0.6);
  // Block i (0-based) covers increments [first(i), last(i)] (1-based).
  std::size_t first(std::size_t i) const { return i * h + 1; }
  std::size_t last(std::size_t i, std::size_t n) const { return std::min((i + 1) * h, n); }
};

double threshold_rv(std::span<const double> x, const SamplingGrid& grid,
                    const TruncationRule& rule);

// Plain realized variance sum Delta_i X^2.
double realized_variance(std::span<const double> x);

struct RvBiasVariance {
  double ab = 0.0;
  double avar = 0.0;
  bool clamped = false;
  std::size_t skipped_blocks = 0;
  std::vector<std::string> flags;
};

// Block estimators of the asymptotic bias and variance of threshold RV.
// Evaluated on the unit-normalised clock (the horizon rescaled to 1),
// which leaves quadratic variation unchanged.
RvBiasVariance rv_bias_variance(std::span<const double> x, const SamplingGrid& grid,
                                const TruncationRule& rule, const BlockPlan& plan);

// (pi/2) sum_{i>=2} |dX_i| 1{<=w} |dX_{i-1}| 1{<=w} on a regular grid.
double threshold_bipower(std::span<const double> x, const SamplingGrid& grid,
                         const TruncationRule& rule);

// Untruncated bipower variation.
double bipower(std::span<const double> x);

// (pi^2/4)(1 + 4/pi - 12/pi^2) T * quarticity.
double bipower_avar(double quarticity, double horizon);

// Hayashi-Yoshida estimator by a linear-time two-pointer sweep. Pairs are
// accumulated in (i, j) lexicographic order.
double hayashi_yoshida(std::span<const double> x1, const SamplingGrid& g1,
                       std::span<const double> x2, const SamplingGrid& g2);

// Same quantity through the one-sided rearrangement
// sum_i Delta_i X1 (X2(t_i^+) - X2(t_{i-1}^-)).
double hayashi_yoshida_one_sided(std::span<const double> x1, const SamplingGrid& g1,
                                 std::span<const double> x2, const SamplingGrid& g2);

}  // namespace plugvol
