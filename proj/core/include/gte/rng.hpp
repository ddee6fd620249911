#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace gte {

// Seed derivation: a 64-bit master seed is split into independent streams by
// hashing a purpose label (FNV-1a 64) together with an index and scrambling the
// result through SplitMix64. Each stream drives a std::mt19937_64, whose output
// sequence is fixed by the C++ standard. Distributions are implemented here
// rather than through <random> so draws do not depend on the standard library.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
    return Rng(derive_seed(master, label, index));
  }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via the polar Box-Muller transform.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gte
