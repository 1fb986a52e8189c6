#include "fairsearch/random.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "fairsearch/error.hpp"

namespace fairsearch {

std::uint64_t mixSeed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

Rng Rng::stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = mixSeed(base);
  for (std::uint64_t key : keys) {
    state = mixSeed(state ^ mixSeed(key + 0x632be59bd9b4e019ULL));
  }
  return Rng(state);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) {
    throw PreconditionError("Rng::below: range must be nonempty");
  }
  // Rejection sampling on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw = engine_();
  while (draw >= limit) {
    draw = engine_();
  }
  return draw % n;
}

std::vector<std::uint64_t> Rng::sampleWithoutReplacement(std::uint64_t n, std::uint64_t count) {
  if (count > n) {
    throw PreconditionError("cannot sample more distinct values than the range holds");
  }
  // Floyd's algorithm: exactly `count` draws, no O(n) storage.
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - count; j < n; ++j) {
    std::uint64_t t = below(j + 1);
    if (!chosen.insert(t).second) {
      chosen.insert(j);
    }
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace fairsearch
