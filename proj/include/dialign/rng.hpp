#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace dialign {

// Deterministic random source. The engine (std::mt19937_64) is fully
// specified by the standard; the distributions are hand-rolled because
// std::uniform_*_distribution output is implementation-defined and we
// promise byte-identical results for a given seed everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return real() < p; }

  // Fisher-Yates; replaces std::shuffle for cross-platform determinism.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Stream-independent child seed, e.g. one per dialogue or per tree.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    // SplitMix64 finalizer over the combined value.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dialign
