#include "plugvol/scenario_io.hpp"

#include <stdexcept>

namespace plugvol {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw std::invalid_argument(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

json vol_json(const VolSpec& v) {
  switch (v.kind) {
    case VolSpec::Kind::Constant:
      return {{"kind", "constant"}, {"sigma", v.sigma}};
    case VolSpec::Kind::Heston:
      return {{"kind", "heston"},   {"v0", v.v0},
              {"kappa", v.kappa},   {"level", v.level},
              {"vol_of_vol", v.vol_of_vol}, {"leverage", v.leverage}};
    case VolSpec::Kind::Function:
      throw std::invalid_argument("function volatility cannot be serialised");
  }
  return {};
}

VolSpec vol_from(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") {
    reject_unknown(j, {"kind", "sigma"}, "vol");
    return VolSpec::constant(get_or(j, "sigma", 0.01));
  }
  if (kind == "heston") {
    reject_unknown(j, {"kind", "v0", "kappa", "level", "vol_of_vol", "leverage"}, "vol");
    return VolSpec::heston(get_or(j, "v0", 1e-4), get_or(j, "kappa", 1.0),
                           get_or(j, "level", 1e-4), get_or(j, "vol_of_vol", 0.0),
                           get_or(j, "leverage", 0.0));
  }
  throw std::invalid_argument("unknown vol kind '" + kind + "' (valid: constant, heston)");
}

json jumps_json(const JumpSpec& s) {
  switch (s.kind) {
    case JumpSpec::Kind::None:
      return {{"kind", "none"}};
    case JumpSpec::Kind::CompoundPoisson:
      return {{"kind", "compound_poisson"},
              {"intensity", s.intensity},
              {"size_mean", s.size_mean},
              {"size_sd", s.size_sd}};
    case JumpSpec::Kind::SmallJumps:
      return {{"kind", "small_jumps"},
              {"activity_index", s.activity_index},
              {"levy_scale", s.levy_scale},
              {"truncation", s.truncation},
              {"max_size", s.max_size}};
  }
  return {};
}

JumpSpec jumps_from(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "none");
  if (kind == "none") return JumpSpec::none();
  if (kind == "compound_poisson") {
    reject_unknown(j, {"kind", "intensity", "size_mean", "size_sd"}, "jumps");
    return JumpSpec::compound_poisson(get_or(j, "intensity", 0.0), get_or(j, "size_mean", 0.0),
                                      get_or(j, "size_sd", 1.0));
  }
  if (kind == "small_jumps") {
    reject_unknown(j, {"kind", "activity_index", "levy_scale", "truncation", "max_size"}, "jumps");
    return JumpSpec::small_jumps(get_or(j, "activity_index", 0.5), get_or(j, "levy_scale", 0.0),
                                 get_or(j, "max_size", 1.0), get_or(j, "truncation", 1e-5));
  }
  throw std::invalid_argument("unknown jump kind '" + kind +
                              "' (valid: none, compound_poisson, small_jumps)");
}

json covariate_json(const CovariateSpec& c) {
  switch (c.kind) {
    case CovariateSpec::Kind::TradeSign:
      return {{"kind", "trade_sign"}, {"flip_prob", c.flip_prob}};
    case CovariateSpec::Kind::Volume:
      return {{"kind", "volume"}, {"log_mean", c.log_mean}, {"log_sd", c.log_sd}};
    case CovariateSpec::Kind::HalfSpread:
      return {{"kind", "half_spread"},
              {"mean", c.mean},
              {"persistence", c.persistence},
              {"innovation_sd", c.innovation_sd}};
    case CovariateSpec::Kind::Constant:
      return {{"kind", "constant"}, {"value", c.value}};
    case CovariateSpec::Kind::Alternating:
      return {{"kind", "alternating"}};
  }
  return {};
}

CovariateSpec covariate_from(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "trade_sign");
  if (kind == "trade_sign") return CovariateSpec::trade_sign(get_or(j, "flip_prob", 0.3));
  if (kind == "volume")
    return CovariateSpec::volume(get_or(j, "log_mean", 0.0), get_or(j, "log_sd", 0.5));
  if (kind == "half_spread")
    return CovariateSpec::half_spread(get_or(j, "mean", 1.0), get_or(j, "persistence", 0.9),
                                      get_or(j, "innovation_sd", 0.1));
  if (kind == "constant") return CovariateSpec::constant(get_or(j, "value", 1.0));
  if (kind == "alternating") return CovariateSpec::alternating();
  throw std::invalid_argument("unknown covariate kind '" + kind +
                              "' (valid: trade_sign, volume, half_spread, constant, alternating)");
}

const char* driver_name(HbtSpec::Driver d) {
  switch (d) {
    case HbtSpec::Driver::IndependentBrownian:
      return "independent";
    case HbtSpec::Driver::OwnPrice:
      return "own_price";
    case HbtSpec::Driver::Mix:
      return "mix";
    case HbtSpec::Driver::Custom:
      return "custom";
  }
  return "";
}

json sampling_json(const SamplingSpec& s) {
  switch (s.kind) {
    case SamplingSpec::Kind::Regular:
      return {{"kind", "regular"}, {"n", s.n}};
    case SamplingSpec::Kind::Poisson:
      return {{"kind", "poisson"}, {"rate", s.rate}};
    case SamplingSpec::Kind::Hbt:
      if (s.hbt.down_fn || s.hbt.up_fn || s.hbt.driver == HbtSpec::Driver::Custom)
        throw std::invalid_argument("HBT callables cannot be serialised");
      return {{"kind", "hbt"},
              {"tick", s.hbt.tick},
              {"down", s.hbt.down},
              {"up", s.hbt.up},
              {"driver", driver_name(s.hbt.driver)},
              {"driver_vol", s.hbt.driver_vol},
              {"mix_weight", s.hbt.mix_weight}};
  }
  return {};
}

SamplingSpec sampling_from(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "regular");
  if (kind == "regular") return SamplingSpec::regular(get_or<std::size_t>(j, "n", 1000));
  if (kind == "poisson") return SamplingSpec::poisson(get_or(j, "rate", 1.0));
  if (kind == "hbt") {
    HbtSpec h;
    h.tick = get_or(j, "tick", 0.01);
    h.down = get_or(j, "down", -1.0);
    h.up = get_or(j, "up", 1.0);
    h.driver_vol = get_or(j, "driver_vol", 1.0);
    h.mix_weight = get_or(j, "mix_weight", 0.5);
    const auto d = get_or<std::string>(j, "driver", "independent");
    if (d == "independent") h.driver = HbtSpec::Driver::IndependentBrownian;
    else if (d == "own_price") h.driver = HbtSpec::Driver::OwnPrice;
    else if (d == "mix") h.driver = HbtSpec::Driver::Mix;
    else throw std::invalid_argument("unknown HBT driver '" + d + "' (valid: independent, own_price, mix)");
    return SamplingSpec::hitting(h);
  }
  throw std::invalid_argument("unknown sampling kind '" + kind + "' (valid: regular, poisson, hbt)");
}

}  // namespace

json to_json(const MarketScenario& s) {
  json j;
  j["horizon"] = s.horizon;
  j["seed"] = s.seed;
  j["fine_steps"] = s.fine_steps;
  j["rho"] = s.rho;
  j["assets"] = json::array();
  for (const auto& a : s.assets) {
    if (a.drift.fn) throw std::invalid_argument("callable drift cannot be serialised");
    j["assets"].push_back({{"x0", a.x0},
                           {"drift", a.drift.constant},
                           {"vol", vol_json(a.vol)},
                           {"jumps", jumps_json(a.jumps)}});
  }
  j["noise"] = {{"impact", s.noise.impact.name()},
                {"theta", vec_json(s.noise.theta)},
                {"lower", vec_json(s.noise.domain.lower)},
                {"upper", vec_json(s.noise.domain.upper)}};
  j["covariates"] = json::array();
  for (const auto& c : s.covariates) j["covariates"].push_back(covariate_json(c));
  j["sampling"] = sampling_json(s.sampling);
  return j;
}

MarketScenario scenario_from_json(const json& j) {
  reject_unknown(j, {"horizon", "seed", "fine_steps", "rho", "assets", "noise", "covariates", "sampling"},
                 "scenario");
  MarketScenario s;
  s.horizon = get_or(j, "horizon", kDefaultHorizon);
  s.seed = get_or<std::uint64_t>(j, "seed", 1);
  s.fine_steps = get_or<std::size_t>(j, "fine_steps", 0);
  s.rho = get_or(j, "rho", 0.0);
  if (j.contains("assets")) {
    s.assets.clear();
    for (const auto& a : j["assets"]) {
      reject_unknown(a, {"x0", "drift", "vol", "jumps"}, "asset");
      AssetDynamics d;
      d.x0 = get_or(a, "x0", 0.0);
      d.drift.constant = get_or(a, "drift", 0.0);
      if (a.contains("vol")) d.vol = vol_from(a["vol"]);
      if (a.contains("jumps")) d.jumps = jumps_from(a["jumps"]);
      s.assets.push_back(d);
    }
  }
  if (j.contains("covariates"))
    for (const auto& c : j["covariates"]) s.covariates.push_back(covariate_from(c));
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    reject_unknown(n, {"impact", "theta", "lower", "upper"}, "noise");
    s.noise.impact = ImpactFunction::from_name(get_or<std::string>(n, "impact", "none"),
                                               s.covariates.size());
    const auto l = static_cast<Eigen::Index>(s.noise.impact.param_dim());
    s.noise.theta = n.contains("theta") ? vec_from(n["theta"]) : Eigen::VectorXd::Zero(l);
    s.noise.domain.lower =
        n.contains("lower") ? vec_from(n["lower"]) : Eigen::VectorXd::Constant(l, -1.0);
    s.noise.domain.upper =
        n.contains("upper") ? vec_from(n["upper"]) : Eigen::VectorXd::Constant(l, 1.0);
  }
  if (j.contains("sampling")) s.sampling = sampling_from(j["sampling"]);
  s.validate();
  return s;
}

}  // namespace plugvol
