#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fieldbench {

/// SplitMix64 finalizer. Used both for seed derivation and as a counter-based
/// generator where draws must be addressable by index (parallel noise,
/// dropout masks) instead of consumed from a shared stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a stream tag/index. Chained
/// calls give independent per-sample, per-purpose streams from one root seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ (0x9e3779b97f4a7c15ull * (tag + 1)));
}
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(seed, a, b), c);
}

/// Sequential RNG with explicit, implementation-pinned draw functions.
/// std::mt19937_64's output sequence is fixed by the standard; the
/// transformations below avoid std::*_distribution, whose results differ
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive, via rejection-free scaling.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    return lo + std::int64_t(std::uint64_t(uniform() * double(span)) % span);
  }

  /// Standard normal, Box-Muller with a cached second value.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = double((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Counter-based generator: the i-th draw is a pure function of (key, i), so
/// consumers may evaluate draws in any order or in parallel and still agree
/// with a sequential run.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// Uniform in [0, 1) at index i.
  double uniform_at(std::uint64_t i) const {
    return double(splitmix64(key_ + i * 0x9e3779b97f4a7c15ull) >> 11) * 0x1.0p-53;
  }

  /// Standard normal at index i (consumes indices 2i and 2i+1).
  double normal_at(std::uint64_t i) const {
    const double u1 =
        double((splitmix64(key_ + (2 * i) * 0x9e3779b97f4a7c15ull) >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform_at(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t key_;
};

}  // namespace fieldbench
