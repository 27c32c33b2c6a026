#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace gml {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives a substream key from a root seed and a tuple of indices. Distinct
// tuples give statistically independent keys.
inline std::uint64_t stream_key(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> ids) {
  std::uint64_t k = mix64(seed ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t id : ids) k = mix64(k ^ mix64(id + 0x3C6EF372FE94F82BULL));
  return k;
}

// Counter-based generator: the i-th output is mix64(key + i * gamma). Each
// work item owns one, so results do not depend on scheduling.
class Substream {
 public:
  using result_type = std::uint64_t;

  explicit Substream(std::uint64_t key) : key_(key) {}
  Substream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids)
      : key_(stream_key(seed, ids)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * 0xD1B54A32D192ED03ULL);
  }

  // Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_(*this); }

  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<int> d(mean);
    return d(*this);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gml
