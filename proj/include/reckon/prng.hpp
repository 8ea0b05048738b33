#pragma once

#include <cstdint>

namespace reckon {

// xorshift32 with the 13/17/5 shift triple. The state is never zero and the
// whole sequence is a pure function of the seed, which is what every
// reproducibility guarantee in this project bottoms out on. Seed 0 is mapped
// to 1 so construction is total.
class Xorshift32 {
 public:
  explicit Xorshift32(uint32_t seed = 1u) : state_(seed ? seed : 1u) {}

  uint32_t next() {
    uint32_t x = state_;
    x ^= x << 13;
    x ^= x >> 17;
    x ^= x << 5;
    state_ = x;
    return x;
  }

  // True with probability threshold / 2^32 (exact at both endpoints).
  bool bernoulli(uint64_t threshold) { return uint64_t{next()} < threshold; }

  uint32_t state() const { return state_; }

 private:
  uint32_t state_;
};

// Converts a probability to a threshold for Xorshift32::bernoulli.
// p = 0 never fires, p = 1 always fires, no rounding surprises at the ends.
inline uint64_t bernoulli_threshold(double p) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return uint64_t{1} << 32;
  return static_cast<uint64_t>(p * 4294967296.0 + 0.5);
}

inline uint64_t splitmix64(uint64_t& s) {
  s += 0x9E3779B97F4A7C15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed for an independent lane. A lane's stream depends only on
// (master, step, domain, lane), never on scheduling, so parallel and serial
// execution orders draw identical randomness.
inline uint32_t derive_seed(uint32_t master, uint64_t step, uint32_t domain,
                            uint32_t lane) {
  uint64_t s = (uint64_t{master} << 32) ^ step;
  splitmix64(s);
  s ^= (uint64_t{domain} << 32) | lane;
  uint64_t z = splitmix64(s);
  uint32_t folded = static_cast<uint32_t>(z ^ (z >> 32));
  return folded ? folded : 1u;
}

// Stream domains, so no two consumers ever share a lane by accident.
enum SeedDomain : uint32_t {
  kDomainWeightInit = 1,
  kDomainTrainTrial = 2,
  kDomainHeldOutTrial = 3,
  kDomainTestTrial = 4,
  kDomainPhase1Row = 5,
  kDomainPhase2Row = 6,
  kDomainFeedback = 7,
};

}  // namespace reckon
