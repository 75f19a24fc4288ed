// JSON form of MarketScenario. Only the named (non-callable) parts of a
// scenario are representable; callables must be attached in code.
//
// Keys (all optional, defaults in brackets):
//   horizon [23400], seed [1], fine_steps [0 = auto], rho [0]
//   assets: [{x0, drift, vol:{kind: constant|heston, sigma | v0,kappa,level,
//             vol_of_vol,leverage}, jumps:{kind: none|compound_poisson|small_jumps,
//             intensity,size_mean,size_sd | activity_index,levy_scale,truncation,max_size}}]
//   noise: {impact: "linear:1"|"none"|"spread_power", theta: [...],
//           lower: [...], upper: [...]}
//   covariates: [{kind: trade_sign|volume|half_spread|constant|alternating, ...}]
//   sampling: {kind: regular|poisson|hbt, n | rate | tick,down,up,driver,driver_vol,mix_weight}
#pragma once

#include "plugvol/simulator.hpp"

#include <json.hpp>

namespace plugvol {

nlohmann::json to_json(const MarketScenario& s);
MarketScenario scenario_from_json(const nlohmann::json& j);

}  // namespace plugvol
