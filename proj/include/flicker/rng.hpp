#pragma once

#include <cmath>
#include <cstdint>

namespace flicker {

/// SplitMix64 generator (Steele, Lea & Flood). One 64-bit word of state,
/// full-period, and cheap to seed, so every trajectory/sample index can own
/// an independent stream via `Rng(base_seed + index)`.
///
/// Gaussian draws use the Marsaglia polar form of Box-Muller, fixed for this
/// build; determinism guarantees are per build, not across libm versions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    double u;
    do {
      u = uniform01();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal draw (polar Box-Muller with one cached spare).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

using Rng = SplitMix64;

}  // namespace flicker
