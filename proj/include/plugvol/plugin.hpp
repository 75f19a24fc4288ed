// Estimate reports for the base estimators and their plug-in versions, which
// run the same estimator on X_hat = Z - phi(Q, theta_hat).
#pragma once

#include "plugvol/local.hpp"
#include "plugvol/noise_fit.hpp"
#include "plugvol/variation.hpp"

#include <optional>
#include <span>
#include <vector>

namespace plugvol {

struct RvOptions {
  std::optional<TruncationRule> rule;  // automatic (per gap) when absent
  double beta = 0.6;
  double activity_index = 0.0;
};

struct BipowerOptions {
  std::optional<TruncationRule> rule;  // automatic (mean gap) when absent
};

struct FunctionalOptions {
  Functional g = Functional::quarticity();
  std::optional<std::size_t> k;        // floor(n^0.42) when absent
  std::optional<TruncationRule> rule;  // automatic when absent
  int growth_p = 3;
  double activity_index = 0.0;

  FunctionalSpec resolve(const PricePaths& x, const SamplingGrid& grid) const;
};

struct VolOfVolOptions {
  double c = 1.0;
  std::optional<std::size_t> k;  // floor(c sqrt(n)) when absent
  bool allow_jumps = false;

  VolOfVolPlan resolve(std::size_t n_increments) const;
};

// Base estimators on a price vector. Reports are finalized (CI attached when
// the variance estimate is usable).
EstimateReport threshold_rv_report(std::span<const double> x, const SamplingGrid& grid,
                                   const RvOptions& opts = {});
EstimateReport bipower_report(std::span<const double> x, const SamplingGrid& grid,
                              const BipowerOptions& opts = {});
EstimateReport hy_report(std::span<const double> x1, const SamplingGrid& g1,
                         std::span<const double> x2, const SamplingGrid& g2);
EstimateReport functional_report(const PricePaths& x, const SamplingGrid& grid,
                                 const FunctionalOptions& opts = {});
EstimateReport vol_of_vol_report(std::span<const double> x, const SamplingGrid& grid,
                                 const VolOfVolOptions& opts = {});

// Plug-in versions. Fits must come from the same series.
EstimateReport plugin_threshold_rv(const ObservedSeries& s, const FittedNoise& fit,
                                   const RvOptions& opts = {});
EstimateReport plugin_bipower(const ObservedSeries& s, const FittedNoise& fit,
                              const BipowerOptions& opts = {});
EstimateReport plugin_hy(const ObservedSeries& s1, const FittedNoise& f1, const ObservedSeries& s2,
                         const FittedNoise& f2);
// One series per asset; all series must share one regular grid.
EstimateReport plugin_functional(const std::vector<ObservedSeries>& s,
                                 const std::vector<FittedNoise>& fits,
                                 const FunctionalOptions& opts = {});
EstimateReport plugin_vol_of_vol(const ObservedSeries& s, const FittedNoise& fit,
                                 const VolOfVolOptions& opts = {});

// Stacks per-asset price vectors observed on one common grid.
PricePaths stack_paths(const std::vector<std::vector<double>>& x);

}  // namespace plugvol
