#include "plugvol/plugin.hpp"

#include <cmath>
#include <stdexcept>

namespace plugvol {

FunctionalSpec FunctionalOptions::resolve(const PricePaths& x, const SamplingGrid& grid) const {
  FunctionalSpec spec = FunctionalSpec::with_defaults(g, x, grid);
  if (k) spec.k = *k;
  if (rule) spec.rule = *rule;
  spec.growth_p = growth_p;
  spec.activity_index = activity_index;
  return spec;
}

VolOfVolPlan VolOfVolOptions::resolve(std::size_t n_increments) const {
  VolOfVolPlan plan = VolOfVolPlan::make(n_increments, c);
  if (k) {
    if (*k == 0 || 2 * *k >= n_increments)
      throw std::invalid_argument("vol-of-vol window k = " + std::to_string(*k) +
                                  " needs 0 < 2k < n = " + std::to_string(n_increments));
    plan.k = *k;
  }
  plan.allow_jumps = allow_jumps;
  return plan;
}

EstimateReport threshold_rv_report(std::span<const double> x, const SamplingGrid& grid,
                                   const RvOptions& opts) {
  const TruncationRule rule = opts.rule ? *opts.rule : TruncationRule::automatic(x, grid, true);
  rule.validate_for_rv(opts.activity_index);
  const std::size_t n = grid.increments();
  EstimateReport r;
  r.estimator_name = "threshold_rv";
  r.xi_hat = threshold_rv(x, grid, rule);
  r.rate_exponent = 0.5;
  r.scale = std::sqrt(static_cast<double>(n));
  r.observations = grid.size();
  const BlockPlan plan = BlockPlan::make(n, opts.beta);
  const auto bv = rv_bias_variance(x, grid, rule, plan);
  r.ab_hat = bv.ab;
  r.avar_hat = bv.avar;
  r.flags = bv.flags;
  r.finalize();
  return r;
}

EstimateReport bipower_report(std::span<const double> x, const SamplingGrid& grid,
                              const BipowerOptions& opts) {
  const TruncationRule rule = opts.rule ? *opts.rule : TruncationRule::automatic(x, grid, false);
  rule.validate_for_bipower();
  const std::size_t n = grid.increments();
  EstimateReport r;
  r.estimator_name = "bipower";
  r.xi_hat = threshold_bipower(x, grid, rule);
  r.rate_exponent = 0.5;
  r.scale = std::sqrt(static_cast<double>(n));
  r.observations = grid.size();
  // Quarticity from the local estimator with its default tuning.
  const PricePaths paths = as_paths(x);
  const FunctionalSpec qs = FunctionalSpec::with_defaults(Functional::quarticity(), paths, grid);
  const auto q = evaluate_functional(paths, grid, qs);
  r.flags = q.flags;
  r.avar_hat = bipower_avar(q.estimate, grid.horizon);
  if (!(r.avar_hat > 0.0)) {
    r.avar_hat = 1e-12;
    r.flags.push_back("avar_clamped");
  }
  r.finalize();
  return r;
}

EstimateReport hy_report(std::span<const double> x1, const SamplingGrid& g1,
                         std::span<const double> x2, const SamplingGrid& g2) {
  EstimateReport r;
  r.estimator_name = "hayashi_yoshida";
  r.xi_hat = hayashi_yoshida(x1, g1, x2, g2);
  r.rate_exponent = 0.5;
  r.scale = std::sqrt(static_cast<double>(std::min(g1.increments(), g2.increments())));
  r.observations = std::min(g1.size(), g2.size());
  r.flags.push_back("avar_unavailable");
  r.finalize();
  return r;
}

EstimateReport functional_report(const PricePaths& x, const SamplingGrid& grid,
                                 const FunctionalOptions& opts) {
  const FunctionalSpec spec = opts.resolve(x, grid);
  const auto res = evaluate_functional(x, grid, spec);
  EstimateReport r;
  r.estimator_name = "functional:" + spec.g.name();
  r.xi_hat = res.estimate;
  r.avar_hat = res.avar;
  r.rate_exponent = 0.5;
  r.scale = std::sqrt(static_cast<double>(grid.increments()));
  r.observations = grid.size();
  r.flags = res.flags;
  if (!(r.avar_hat > 0.0)) {
    r.avar_hat = 1e-12;
    r.flags.push_back("avar_clamped");
  }
  r.finalize();
  return r;
}

EstimateReport vol_of_vol_report(std::span<const double> x, const SamplingGrid& grid,
                                 const VolOfVolOptions& opts) {
  const VolOfVolPlan plan = opts.resolve(grid.increments());
  EstimateReport r;
  r.estimator_name = "vol_of_vol";
  r.xi_hat = vol_of_vol(x, grid, plan);
  const auto av = vol_of_vol_avar(x, grid, plan);
  r.avar_hat = av.avar;
  r.flags = av.flags;
  r.rate_exponent = 0.25;
  r.scale = std::sqrt(static_cast<double>(grid.increments()) / static_cast<double>(plan.k));
  r.observations = grid.size();
  r.finalize();
  return r;
}

EstimateReport plugin_threshold_rv(const ObservedSeries& s, const FittedNoise& fit,
                                   const RvOptions& opts) {
  const auto x = plugin_price(s, fit);
  return threshold_rv_report(x, s.grid, opts);
}

EstimateReport plugin_bipower(const ObservedSeries& s, const FittedNoise& fit,
                              const BipowerOptions& opts) {
  const auto x = plugin_price(s, fit);
  return bipower_report(x, s.grid, opts);
}

EstimateReport plugin_hy(const ObservedSeries& s1, const FittedNoise& f1, const ObservedSeries& s2,
                         const FittedNoise& f2) {
  const auto x1 = plugin_price(s1, f1);
  const auto x2 = plugin_price(s2, f2);
  return hy_report(x1, s1.grid, x2, s2.grid);
}

PricePaths stack_paths(const std::vector<std::vector<double>>& x) {
  if (x.empty()) throw std::invalid_argument("no price vectors to stack");
  PricePaths p(static_cast<Eigen::Index>(x.front().size()), static_cast<Eigen::Index>(x.size()));
  for (std::size_t a = 0; a < x.size(); ++a) {
    if (x[a].size() != x.front().size())
      throw std::invalid_argument("price vectors differ in length");
    for (std::size_t i = 0; i < x[a].size(); ++i)
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = x[a][i];
  }
  return p;
}

EstimateReport plugin_functional(const std::vector<ObservedSeries>& s,
                                 const std::vector<FittedNoise>& fits,
                                 const FunctionalOptions& opts) {
  if (s.empty() || s.size() != fits.size())
    throw std::invalid_argument("plugin_functional needs one fit per series");
  std::vector<std::vector<double>> x;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (s[a].grid.times != s.front().grid.times)
      throw std::invalid_argument("functional estimator needs all assets on one grid");
    x.push_back(plugin_price(s[a], fits[a]));
  }
  return functional_report(stack_paths(x), s.front().grid, opts);
}

EstimateReport plugin_vol_of_vol(const ObservedSeries& s, const FittedNoise& fit,
                                 const VolOfVolOptions& opts) {
  const auto x = plugin_price(s, fit);
  return vol_of_vol_report(x, s.grid, opts);
}

}  // namespace plugvol
