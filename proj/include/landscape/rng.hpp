#pragma once

#include <cstdint>
#include <random>

namespace landscape {

// Deterministic draws built directly on the (bit-exact) mt19937_64 stream.
// The standard <random> distributions are implementation-defined, which
// would break byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Splittable child-seed scheme: a SplitMix64-style mix of the master seed
/// and up to three indices. Identical inputs give identical children on any
/// platform, and distinct index tuples give independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace landscape
