#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace derm {

// Seeded generator with platform-independent bounded draws. std::mt19937_64
// output is fixed by the standard; the distributions in <random> are not, so
// every derived quantity goes through the helpers below.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Mixes a stream index into the seed so per-class / per-epoch streams stay
  // independent of iteration order.
  SeededRng(std::uint64_t seed, std::uint64_t stream)
      : engine_(mix(seed, stream)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % bound;
  }

  // Uniform real in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace derm
