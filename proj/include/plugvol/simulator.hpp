// Synthetic market generator: latent Ito semimartingale paths on a fine
// Euler grid, limit-order-book covariates, parametric noise contamination and
// three observation schemes (regular, Poisson, hitting-boundary-with-time).
#pragma once

#include "plugvol/core_model.hpp"
#include "plugvol/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace plugvol {

struct DriftSpec {
  double constant = 0.0;
  std::function<double(double)> fn;  // overrides constant when set

  double at(double t) const { return fn ? fn(t) : constant; }
};

struct VolSpec {
  enum class Kind { Constant, Heston, Function };
  Kind kind = Kind::Constant;
  double sigma = 0.01;  // Constant: spot volatility per sqrt(second)
  // Heston-type variance v = sigma^2:
  //   dv = kappa (level - v+) dt + vol_of_vol sqrt(v+) dW_v,  corr(dW, dW_v) = leverage
  // with full truncation v+ = max(v, 0).
  double v0 = 1e-4;
  double kappa = 1.0;
  double level = 1e-4;
  double vol_of_vol = 0.0;
  double leverage = 0.0;
  std::function<double(double)> fn;  // Function: deterministic sigma(t)

  static VolSpec constant(double s) {
    VolSpec v;
    v.sigma = s;
    return v;
  }
  static VolSpec heston(double v0, double kappa, double level, double xi, double leverage = 0.0);
  void validate() const;
};

struct JumpSpec {
  enum class Kind { None, CompoundPoisson, SmallJumps };
  Kind kind = Kind::None;
  // CompoundPoisson: intensity per unit time, N(size_mean, size_sd^2) sizes.
  double intensity = 0.0;
  double size_mean = 0.0;
  double size_sd = 1.0;
  // SmallJumps: symmetric Levy density levy_scale * |x|^(-1-r) on
  // truncation <= |x| <= max_size, realised as a compound Poisson process.
  double activity_index = 0.5;
  double levy_scale = 0.0;
  double truncation = 1e-5;
  double max_size = 1.0;

  static JumpSpec none() { return {}; }
  static JumpSpec compound_poisson(double intensity, double mean, double sd);
  static JumpSpec small_jumps(double r, double scale, double max_size = 1.0,
                              double truncation = 1e-5);
  // Total jump intensity per unit time.
  double total_intensity() const;
  bool active() const { return kind != Kind::None && total_intensity() > 0.0; }
  void validate() const;
};

struct AssetDynamics {
  double x0 = 0.0;
  DriftSpec drift;
  VolSpec vol;
  JumpSpec jumps;
};

struct CovariateSpec {
  enum class Kind { TradeSign, Volume, HalfSpread, Constant, Alternating };
  Kind kind = Kind::TradeSign;
  // TradeSign: persistent +-1 Markov chain.
  double flip_prob = 0.3;
  // Volume: lognormal exp(N(log_mean, log_sd^2)).
  double log_mean = 0.0;
  double log_sd = 0.5;
  // HalfSpread: exp of an AR(1) in logs around log(mean).
  double mean = 1.0;
  double persistence = 0.9;
  double innovation_sd = 0.1;
  // Constant.
  double value = 1.0;

  static CovariateSpec trade_sign(double flip = 0.3);
  static CovariateSpec volume(double log_mean = 0.0, double log_sd = 0.5);
  static CovariateSpec half_spread(double mean = 1.0, double phi = 0.9, double sd = 0.1);
  static CovariateSpec constant(double v);
  static CovariateSpec alternating();
};

struct HbtSpec {
  enum class Driver { IndependentBrownian, OwnPrice, Mix, Custom };
  double tick = 0.01;  // alpha
  double down = -1.0;  // d, used unless down_fn is set
  double up = 1.0;     // u, used unless up_fn is set
  std::function<double(double, double)> down_fn;  // (t, t - t_{i-1}) -> d < 0
  std::function<double(double, double)> up_fn;    // (t, t - t_{i-1}) -> u > 0
  Driver driver = Driver::IndependentBrownian;
  double driver_vol = 1.0;   // volatility of the independent Brownian driver
  double mix_weight = 0.5;   // Mix: Y = w X + (1 - w) B
  std::function<double(double)> custom;  // Custom: deterministic Y(t)

  double lower(double t, double elapsed) const { return down_fn ? down_fn(t, elapsed) : down; }
  double upper(double t, double elapsed) const { return up_fn ? up_fn(t, elapsed) : up; }
};

struct SamplingSpec {
  enum class Kind { Regular, Poisson, Hbt };
  Kind kind = Kind::Regular;
  std::size_t n = 1000;  // Regular: number of increments
  double rate = 1.0;     // Poisson: events per unit time
  HbtSpec hbt;

  static SamplingSpec regular(std::size_t n) {
    SamplingSpec s;
    s.n = n;
    return s;
  }
  static SamplingSpec poisson(double rate) {
    SamplingSpec s;
    s.kind = Kind::Poisson;
    s.rate = rate;
    return s;
  }
  static SamplingSpec hitting(const HbtSpec& h) {
    SamplingSpec s;
    s.kind = Kind::Hbt;
    s.hbt = h;
    return s;
  }
};

struct MarketScenario {
  double horizon = kDefaultHorizon;
  std::vector<AssetDynamics> assets = std::vector<AssetDynamics>(1);
  double rho = 0.0;  // correlation of the price Brownians (two assets)
  NoiseSpec noise;
  std::vector<CovariateSpec> covariates;  // one generator per Q column
  SamplingSpec sampling;
  std::size_t fine_steps = 0;  // 0: ten fine steps per expected observation
  std::uint64_t seed = 1;

  std::size_t n_assets() const { return assets.size(); }
  bool has_jumps() const;
  std::size_t resolved_fine_steps() const;
  void validate() const;
};

// Simulates every asset of the scenario on a fine grid of `fine_steps`
// Euler steps. Streams are keyed by (seed, replication) only.
std::vector<LatentPath> simulate_latent(const MarketScenario& spec, std::size_t fine_steps,
                                        std::uint64_t replication = 0);

struct GridSample {
  SamplingGrid grid;
  std::vector<std::string> flags;
};

// Observation times for one asset. `rng` feeds Poisson arrivals and the
// independent Brownian HBT driver.
GridSample sample_grid(const LatentPath& path, const SamplingSpec& spec, Engine& rng);

// z_i = X(t_i) + phi(q_i, theta_0) with q_i drawn from `covariates`.
ObservedSeries contaminate(const LatentPath& path, const SamplingGrid& grid,
                           const NoiseSpec& noise, const std::vector<CovariateSpec>& covariates,
                           Engine& rng);

// Draws covariate rows for `rows` observations.
CovariateMatrix draw_covariates(const std::vector<CovariateSpec>& covariates, std::size_t rows,
                                Engine& rng);

struct Realization {
  std::vector<LatentPath> paths;
  std::vector<ObservedSeries> series;
  std::vector<std::vector<double>> latent_at_obs;  // X(t_i) per asset
  std::vector<std::string> flags;
};

// Full pipeline for one replication: latent paths, grids, contamination.
Realization simulate_market(const MarketScenario& spec, std::uint64_t replication = 0);

// Two-asset realisation with independently sampled (asynchronous) grids.
Realization simulate_pair(const MarketScenario& spec, std::uint64_t replication = 0);

}  // namespace plugvol
