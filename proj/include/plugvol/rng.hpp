// Counter-keyed random streams.
//
// A stream is identified by (seed, replication, purpose, index). The key is
// hashed with SplitMix64 into the seed of a Mersenne Twister, so any two
// distinct keys give independent-looking streams and a replication draws the
// same numbers no matter which worker runs it or in which order.
#pragma once

#include <cstdint>
#include <random>

namespace plugvol {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Purposes of the sub-streams a replication consumes.
enum class Stream : std::uint64_t {
  PriceBrownian = 1,
  VolBrownian = 2,
  Jumps = 3,
  Sampling = 4,
  Covariates = 5,
  Driver = 6,
  Harness = 7,
};

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                                Stream purpose, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ replication);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ index);
  return h;
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t replication, Stream purpose,
                          std::uint64_t index = 0) {
  return Engine(stream_key(seed, replication, purpose, index));
}

}  // namespace plugvol
