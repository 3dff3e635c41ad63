#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace geoconcept {

// Seeded generator with platform-independent draws. std distributions are
// implementation-defined, so uniform/normal/index sampling is done here on top
// of the raw mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Box-Muller, both outputs used).
  double normal();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a salt (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace geoconcept
