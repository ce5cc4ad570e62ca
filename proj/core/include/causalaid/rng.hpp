#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace causalaid {

// splitmix64 finalizer. Used for seeding and for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of `label`.
std::uint64_t hash_label(std::string_view label);

// Per-component seed: splitmix64(seed ^ splitmix64(hash_label(label) + index)).
// Every stochastic component (bootstrap replicate b, refutation trial i,
// forest tree j, ...) draws from its own stream derived this way, so results
// do not depend on execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                          std::uint64_t index = 0);

// xoshiro256** 1.0 seeded from a single 64-bit value through splitmix64.
// Distributions are implemented here rather than taken from <random> because
// the standard library's distributions are not specified bit-for-bit.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // n indices drawn with replacement from [0, n).
  std::vector<std::size_t> resample_indices(std::size_t n);

 private:
  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace causalaid
