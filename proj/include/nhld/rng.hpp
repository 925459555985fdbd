#pragma once

#include <cstdint>

namespace nhld {

// SplitMix64. Deterministic across platforms; used for simulation streams and
// test-data generation so repeated runs are byte-identical.
struct SplitMix64 {
  uint64_t state = 0x9e3779b97f4a7c15ull;

  explicit SplitMix64(uint64_t seed = 0x9e3779b97f4a7c15ull) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return next() % n; }
};

// Independent stream for replica i of a master seed.
inline SplitMix64 replica_stream(uint64_t master_seed, uint64_t replica) {
  SplitMix64 mix(master_seed ^ (0x9e3779b97f4a7c15ull * (replica + 1)));
  mix.next();
  mix.next();
  return mix;
}

}  // namespace nhld
