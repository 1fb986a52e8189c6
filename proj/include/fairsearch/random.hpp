#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace fairsearch {

// Seeded random source. Only the raw mt19937_64 stream is used (its output is
// fixed by the standard); distributions are implemented here so results do
// not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a base seed and a list of keys, e.g.
  /// (rng_seed, phase, round, index). Same keys always give the same stream.
  static Rng stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// `count` distinct values from [0, n), ascending. Requires count <= n.
  std::vector<std::uint64_t> sampleWithoutReplacement(std::uint64_t n, std::uint64_t count);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive stream seeds.
std::uint64_t mixSeed(std::uint64_t value);

}  // namespace fairsearch
