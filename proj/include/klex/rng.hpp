#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace klex {

/// Seeded generator with platform-independent bounded draws.
///
/// std::uniform_int_distribution is implementation-defined, so draws are
/// derived from the raw mt19937_64 stream by rejection sampling instead.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = hi - lo + 1;
    if (span == 0) return engine_();  // full 64-bit range
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return lo + x % span;
  }

  /// True with probability num/den.
  bool chance(std::uint64_t num, std::uint64_t den) { return uniform(0, den - 1) < num; }

  std::uint64_t raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace klex
