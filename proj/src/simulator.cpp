#include "plugvol/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plugvol {

VolSpec VolSpec::heston(double v0, double kappa, double level, double xi, double leverage) {
  VolSpec v;
  v.kind = Kind::Heston;
  v.v0 = v0;
  v.kappa = kappa;
  v.level = level;
  v.vol_of_vol = xi;
  v.leverage = leverage;
  return v;
}

void VolSpec::validate() const {
  switch (kind) {
    case Kind::Constant:
      if (!(sigma >= 0.0)) throw std::invalid_argument("constant volatility must be >= 0");
      break;
    case Kind::Heston:
      if (!(level > 0.0)) throw std::invalid_argument("Heston level must be positive");
      if (!(v0 >= 0.0)) throw std::invalid_argument("Heston v0 must be >= 0");
      if (!(kappa >= 0.0)) throw std::invalid_argument("Heston kappa must be >= 0");
      if (!(vol_of_vol >= 0.0)) throw std::invalid_argument("Heston vol_of_vol must be >= 0");
      if (!(std::abs(leverage) <= 1.0)) throw std::invalid_argument("leverage must be in [-1,1]");
      break;
    case Kind::Function:
      if (!fn) throw std::invalid_argument("function volatility needs a callable");
      break;
  }
}

JumpSpec JumpSpec::compound_poisson(double intensity, double mean, double sd) {
  JumpSpec j;
  j.kind = Kind::CompoundPoisson;
  j.intensity = intensity;
  j.size_mean = mean;
  j.size_sd = sd;
  return j;
}

JumpSpec JumpSpec::small_jumps(double r, double scale, double max_size, double truncation) {
  JumpSpec j;
  j.kind = Kind::SmallJumps;
  j.activity_index = r;
  j.levy_scale = scale;
  j.max_size = max_size;
  j.truncation = truncation;
  return j;
}

double JumpSpec::total_intensity() const {
  switch (kind) {
    case Kind::None:
      return 0.0;
    case Kind::CompoundPoisson:
      return intensity;
    case Kind::SmallJumps: {
      const double r = activity_index;
      const double mass = r == 0.0 ? std::log(max_size / truncation)
                                   : (std::pow(truncation, -r) - std::pow(max_size, -r)) / r;
      return 2.0 * levy_scale * mass;
    }
  }
  return 0.0;
}

void JumpSpec::validate() const {
  if (kind == Kind::CompoundPoisson) {
    if (!(intensity >= 0.0)) throw std::invalid_argument("jump intensity must be >= 0");
    if (!(size_sd >= 0.0)) throw std::invalid_argument("jump size sd must be >= 0");
  }
  if (kind == Kind::SmallJumps) {
    if (!(activity_index >= 0.0 && activity_index < 1.0))
      throw std::invalid_argument("activity index r must lie in [0,1)");
    if (!(levy_scale >= 0.0)) throw std::invalid_argument("Levy scale must be >= 0");
    if (!(truncation > 0.0 && max_size > truncation))
      throw std::invalid_argument("small-jump support must satisfy 0 < truncation < max_size");
  }
}

CovariateSpec CovariateSpec::trade_sign(double flip) {
  CovariateSpec c;
  c.kind = Kind::TradeSign;
  c.flip_prob = flip;
  return c;
}

CovariateSpec CovariateSpec::volume(double log_mean, double log_sd) {
  CovariateSpec c;
  c.kind = Kind::Volume;
  c.log_mean = log_mean;
  c.log_sd = log_sd;
  return c;
}

CovariateSpec CovariateSpec::half_spread(double mean, double phi, double sd) {
  CovariateSpec c;
  c.kind = Kind::HalfSpread;
  c.mean = mean;
  c.persistence = phi;
  c.innovation_sd = sd;
  return c;
}

CovariateSpec CovariateSpec::constant(double v) {
  CovariateSpec c;
  c.kind = Kind::Constant;
  c.value = v;
  return c;
}

CovariateSpec CovariateSpec::alternating() {
  CovariateSpec c;
  c.kind = Kind::Alternating;
  return c;
}

bool MarketScenario::has_jumps() const {
  return std::any_of(assets.begin(), assets.end(),
                     [](const AssetDynamics& a) { return a.jumps.active(); });
}

std::size_t MarketScenario::resolved_fine_steps() const {
  if (fine_steps > 0) return fine_steps;
  switch (sampling.kind) {
    case SamplingSpec::Kind::Regular:
      return std::max<std::size_t>(10 * sampling.n, 1000);
    case SamplingSpec::Kind::Poisson:
      return std::max<std::size_t>(
          static_cast<std::size_t>(std::ceil(10.0 * sampling.rate * horizon)), 1000);
    case SamplingSpec::Kind::Hbt:
      return 100000;
  }
  return 1000;
}

void MarketScenario::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (assets.empty() || assets.size() > 2) throw std::invalid_argument("n_assets must be 1 or 2");
  if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [-1,1]");
  for (const auto& a : assets) {
    a.vol.validate();
    a.jumps.validate();
  }
  if (noise.impact.covariate_dim() > covariates.size())
    throw std::invalid_argument("impact function needs " +
                                std::to_string(noise.impact.covariate_dim()) +
                                " covariates, scenario defines " +
                                std::to_string(covariates.size()));
  noise.validate();
  if (sampling.kind == SamplingSpec::Kind::Regular && sampling.n == 0)
    throw std::invalid_argument("regular sampling needs n >= 1");
  if (sampling.kind == SamplingSpec::Kind::Poisson && !(sampling.rate > 0.0))
    throw std::invalid_argument("Poisson sampling needs a positive rate");
  if (sampling.kind == SamplingSpec::Kind::Hbt) {
    if (!(sampling.hbt.tick > 0.0)) throw std::invalid_argument("HBT tick must be positive");
    if (!sampling.hbt.down_fn && !(sampling.hbt.down < 0.0))
      throw std::invalid_argument("HBT down process must be negative");
    if (!sampling.hbt.up_fn && !(sampling.hbt.up > 0.0))
      throw std::invalid_argument("HBT up process must be positive");
  }
}

//---------------------------------------------------------------------------
// Latent paths
//---------------------------------------------------------------------------
namespace {

std::vector<JumpEvent> draw_jumps(const JumpSpec& spec, double horizon, std::size_t steps,
                                  Engine& rng) {
  std::vector<JumpEvent> out;
  const double lambda = spec.total_intensity();
  if (spec.kind == JumpSpec::Kind::None || lambda <= 0.0) return out;
  std::poisson_distribution<long> count_dist(lambda * horizon);
  const long count = count_dist(rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(spec.size_mean, spec.size_sd);
  const double dt = horizon / static_cast<double>(steps);
  for (long m = 0; m < count; ++m) {
    JumpEvent e;
    e.time = horizon * unif(rng);
    if (spec.kind == JumpSpec::Kind::CompoundPoisson) {
      e.size = normal(rng);
    } else {
      // Inverse CDF of the |x|^(-1-r) law on [truncation, max_size].
      const double r = spec.activity_index;
      const double u = unif(rng);
      double mag;
      if (r == 0.0) {
        mag = spec.truncation * std::pow(spec.max_size / spec.truncation, u);
      } else {
        const double a = std::pow(spec.truncation, -r);
        const double b = std::pow(spec.max_size, -r);
        mag = std::pow(a - u * (a - b), -1.0 / r);
      }
      e.size = unif(rng) < 0.5 ? -mag : mag;
    }
    auto node = static_cast<std::size_t>(std::llround(e.time / dt));
    e.node = std::clamp<std::size_t>(node, 1, steps);
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  return out;
}

}  // namespace

std::vector<LatentPath> simulate_latent(const MarketScenario& spec, std::size_t fine_steps,
                                        std::uint64_t replication) {
  if (fine_steps == 0) throw std::invalid_argument("fine_steps must be positive");
  spec.validate();
  const std::size_t na = spec.n_assets();
  const double dt = spec.horizon / static_cast<double>(fine_steps);
  const double sdt = std::sqrt(dt);

  std::vector<LatentPath> paths(na);
  std::vector<Engine> price_rng, vol_rng;
  for (std::size_t a = 0; a < na; ++a) {
    price_rng.push_back(make_engine(spec.seed, replication, Stream::PriceBrownian, a));
    vol_rng.push_back(make_engine(spec.seed, replication, Stream::VolBrownian, a));
    auto& p = paths[a];
    p.horizon = spec.horizon;
    p.fine_times.resize(fine_steps + 1);
    for (std::size_t k = 0; k <= fine_steps; ++k)
      p.fine_times[k] = spec.horizon * static_cast<double>(k) / static_cast<double>(fine_steps);
    p.x_cont.assign(fine_steps + 1, 0.0);
    p.sigma.assign(fine_steps + 1, 0.0);
    p.sigma_vol.assign(fine_steps + 1, 0.0);
  }

  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::vector<double> variance(na, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const auto& vs = spec.assets[a].vol;
    paths[a].x_cont[0] = spec.assets[a].x0;
    if (vs.kind == VolSpec::Kind::Heston) variance[a] = vs.v0;
  }
  const double rho = spec.rho;
  const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  std::vector<double> dw(na);
  for (std::size_t k = 0; k < fine_steps; ++k) {
    const double t = paths[0].fine_times[k];
    // Price Brownian increments; asset 2 loads on asset 1 through rho.
    const double z0 = std_normal(price_rng[0]);
    dw[0] = z0;
    if (na == 2) dw[1] = rho * z0 + rho_perp * std_normal(price_rng[1]);
    for (std::size_t a = 0; a < na; ++a) {
      const auto& dyn = spec.assets[a];
      auto& p = paths[a];
      double sig = 0.0;
      switch (dyn.vol.kind) {
        case VolSpec::Kind::Constant:
          sig = dyn.vol.sigma;
          break;
        case VolSpec::Kind::Function:
          sig = dyn.vol.fn(t);
          break;
        case VolSpec::Kind::Heston: {
          const double vplus = std::max(variance[a], 0.0);
          sig = std::sqrt(vplus);
          p.sigma_vol[k] = dyn.vol.vol_of_vol * sig;
          const double lev = dyn.vol.leverage;
          const double zv = lev * dw[a] +
                            std::sqrt(std::max(0.0, 1.0 - lev * lev)) * std_normal(vol_rng[a]);
          variance[a] += dyn.vol.kappa * (dyn.vol.level - vplus) * dt +
                         dyn.vol.vol_of_vol * sig * sdt * zv;
          break;
        }
      }
      p.sigma[k] = sig;
      p.x_cont[k + 1] = p.x_cont[k] + dyn.drift.at(t) * dt + sig * sdt * dw[a];
    }
  }
  // Terminal node values of the volatility paths.
  for (std::size_t a = 0; a < na; ++a) {
    const auto& vs = spec.assets[a].vol;
    auto& p = paths[a];
    if (vs.kind == VolSpec::Kind::Constant) p.sigma[fine_steps] = vs.sigma;
    if (vs.kind == VolSpec::Kind::Function) p.sigma[fine_steps] = vs.fn(spec.horizon);
    if (vs.kind == VolSpec::Kind::Heston) {
      p.sigma[fine_steps] = std::sqrt(std::max(variance[a], 0.0));
      p.sigma_vol[fine_steps] = vs.vol_of_vol * p.sigma[fine_steps];
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    auto jump_rng = make_engine(spec.seed, replication, Stream::Jumps, a);
    auto& p = paths[a];
    p.jumps = draw_jumps(spec.assets[a].jumps, spec.horizon, fine_steps, jump_rng);
    const auto j = p.jump_part();
    p.x.resize(fine_steps + 1);
    for (std::size_t k = 0; k <= fine_steps; ++k) p.x[k] = p.x_cont[k] + j[k];
  }
  return paths;
}

//---------------------------------------------------------------------------
// Sampling schemes
//---------------------------------------------------------------------------
GridSample sample_grid(const LatentPath& path, const SamplingSpec& spec, Engine& rng) {
  GridSample out;
  auto& g = out.grid;
  g.horizon = path.horizon;
  switch (spec.kind) {
    case SamplingSpec::Kind::Regular:
      g = SamplingGrid::make_regular(spec.n, path.horizon);
      break;
    case SamplingSpec::Kind::Poisson: {
      std::exponential_distribution<double> gap(spec.rate);
      g.times.push_back(0.0);
      double t = gap(rng);
      while (t <= path.horizon) {
        if (t > g.times.back()) g.times.push_back(t);
        t += gap(rng);
      }
      break;
    }
    case SamplingSpec::Kind::Hbt: {
      const auto& h = spec.hbt;
      const std::size_t nodes = path.fine_times.size();
      std::vector<double> y(nodes, 0.0);
      std::vector<double> b;
      if (h.driver == HbtSpec::Driver::IndependentBrownian || h.driver == HbtSpec::Driver::Mix) {
        std::normal_distribution<double> nd(0.0, 1.0);
        b.assign(nodes, 0.0);
        const double s = h.driver_vol * std::sqrt(path.dt());
        for (std::size_t k = 1; k < nodes; ++k) b[k] = b[k - 1] + s * nd(rng);
      }
      for (std::size_t k = 0; k < nodes; ++k) {
        switch (h.driver) {
          case HbtSpec::Driver::IndependentBrownian:
            y[k] = b[k];
            break;
          case HbtSpec::Driver::OwnPrice:
            y[k] = path.x[k];
            break;
          case HbtSpec::Driver::Mix:
            y[k] = h.mix_weight * path.x[k] + (1.0 - h.mix_weight) * b[k];
            break;
          case HbtSpec::Driver::Custom:
            y[k] = h.custom(path.fine_times[k]);
            break;
        }
      }
      g.times.push_back(0.0);
      std::size_t anchor = 0;
      for (std::size_t k = 1; k < nodes; ++k) {
        const double t = path.fine_times[k];
        const double elapsed = t - path.fine_times[anchor];
        const double dy = y[k] - y[anchor];
        // Closed band: landing exactly on a boundary is not an exit.
        if (dy < h.tick * h.lower(t, elapsed) || dy > h.tick * h.upper(t, elapsed)) {
          g.times.push_back(t);
          anchor = k;
        }
      }
      if (g.times.size() == 1) out.flags.push_back("hbt_band_never_hit");
      break;
    }
  }
  return out;
}

CovariateMatrix draw_covariates(const std::vector<CovariateSpec>& covariates, std::size_t rows,
                                Engine& rng) {
  const auto n = static_cast<Eigen::Index>(rows);
  CovariateMatrix q(n, static_cast<Eigen::Index>(covariates.size()));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto& c = covariates[j];
    const auto jj = static_cast<Eigen::Index>(j);
    double state = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = 0.0;
      switch (c.kind) {
        case CovariateSpec::Kind::TradeSign:
          if (i == 0) state = unif(rng) < 0.5 ? -1.0 : 1.0;
          else if (unif(rng) < c.flip_prob) state = -state;
          v = state;
          break;
        case CovariateSpec::Kind::Volume:
          v = std::exp(c.log_mean + c.log_sd * nd(rng));
          break;
        case CovariateSpec::Kind::HalfSpread: {
          const double centre = std::log(c.mean);
          if (i == 0) {
            const double stat_sd =
                c.innovation_sd / std::sqrt(std::max(1e-12, 1.0 - c.persistence * c.persistence));
            state = centre + stat_sd * nd(rng);
          } else {
            state = centre + c.persistence * (state - centre) + c.innovation_sd * nd(rng);
          }
          v = std::exp(state);
          break;
        }
        case CovariateSpec::Kind::Constant:
          v = c.value;
          break;
        case CovariateSpec::Kind::Alternating:
          v = (i % 2 == 0) ? 1.0 : -1.0;
          break;
      }
      q(i, jj) = v;
    }
  }
  return q;
}

ObservedSeries contaminate(const LatentPath& path, const SamplingGrid& grid,
                           const NoiseSpec& noise, const std::vector<CovariateSpec>& covariates,
                           Engine& rng) {
  if (!grid.times.empty() && grid.times.back() > path.horizon)
    throw std::invalid_argument("grid extends beyond the latent path horizon");
  ObservedSeries s;
  s.grid = grid;
  s.q = draw_covariates(covariates, grid.size(), rng);
  const std::size_t l = noise.impact.param_dim();
  s.z.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = path.value_at(grid.times[i]);
    const double phi = l == 0 ? 0.0 : noise.impact.value(s.covariates(i), {noise.theta.data(), l});
    s.z[i] = x + phi;
  }
  return s;
}

Realization simulate_market(const MarketScenario& spec, std::uint64_t replication) {
  Realization r;
  r.paths = simulate_latent(spec, spec.resolved_fine_steps(), replication);
  for (std::size_t a = 0; a < r.paths.size(); ++a) {
    auto srng = make_engine(spec.seed, replication, Stream::Sampling, a);
    auto gs = sample_grid(r.paths[a], spec.sampling, srng);
    for (auto& f : gs.flags) r.flags.push_back("asset" + std::to_string(a + 1) + ":" + f);
    auto crng = make_engine(spec.seed, replication, Stream::Covariates, a);
    r.series.push_back(contaminate(r.paths[a], gs.grid, spec.noise, spec.covariates, crng));
    std::vector<double> lat(gs.grid.size());
    for (std::size_t i = 0; i < gs.grid.size(); ++i)
      lat[i] = r.paths[a].value_at(gs.grid.times[i]);
    r.latent_at_obs.push_back(std::move(lat));
  }
  return r;
}

Realization simulate_pair(const MarketScenario& spec, std::uint64_t replication) {
  if (spec.n_assets() != 2) throw std::invalid_argument("simulate_pair needs n_assets = 2");
  return simulate_market(spec, replication);
}

}  // namespace plugvol
