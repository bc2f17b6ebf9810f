#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace asncfl {

/// SplitMix64 step; used to derive independent sub-seeds from a base seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a base seed with up to three stream tags into a new seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a,
                          std::uint64_t tag_b = 0, std::uint64_t tag_c = 0);

// Portable sampler. std::*_distribution is implementation-defined, so every
// draw here is built from raw mt19937_64 output to keep runs bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one variate per call.
  double normal();

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace asncfl
