#ifndef SEQMC_RNG_HPP
#define SEQMC_RNG_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace seqmc {

namespace rng_detail {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Steele/Lea/Flood; Vigna's fixed-increment variant).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace rng_detail

/// Counter-based splittable PRNG. Output j is mix64(key + j*gamma), so a
/// stream is a pure function of (key, counter). split(stream) derives a child
/// key from (key, stream) without touching the parent counter: child streams
/// are reproducible regardless of how much the parent has been consumed and
/// of any parallel scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : key_(rng_detail::mix64(seed + rng_detail::kGamma)), counter_(0) {}

  std::uint64_t next_u64() {
    counter_ += rng_detail::kGamma;
    return rng_detail::mix64(key_ + counter_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in {0, .., bound-1}; bound >= 1.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) {
      throw std::invalid_argument("Rng::next_below: bound must be >= 1");
    }
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) {
        return r % bound;
      }
    }
  }

  /// Independent child stream; the parent is unchanged.
  Rng split(std::uint64_t stream) const {
    std::uint64_t child_key = rng_detail::mix64(
        rng_detail::mix64(key_ ^ 0x5851F42D4C957F2Dull) + stream * rng_detail::kGamma);
    return Rng(child_key, 0);
  }

  /// Draws a 0-based index from a probability mass function. Entries with
  /// zero mass are never returned, even when rounding leaves a sliver of
  /// unassigned mass at the top of the cumulative sum.
  int sample_categorical(std::span<const double> pmf) {
    double u = next_double();
    double cum = 0.0;
    int last_positive = -1;
    for (int k = 0; k < static_cast<int>(pmf.size()); ++k) {
      double p = pmf[static_cast<std::size_t>(k)];
      if (p <= 0.0) {
        continue;
      }
      cum += p;
      last_positive = k;
      if (u < cum) {
        return k;
      }
    }
    if (last_positive < 0) {
      throw std::invalid_argument("Rng::sample_categorical: no positive mass");
    }
    return last_positive;
  }

  /// Fisher-Yates shuffle; identical results on every platform.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(next_below(i))]);
    }
  }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace seqmc

#endif
