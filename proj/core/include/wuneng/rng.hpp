#pragma once

#include <cstdint>

namespace wuneng {

/// Counter-based generator: output i is splitmix64(seed + i * golden).
///
/// The stream is a pure function of (seed, counter), so it is identical on
/// every platform. An Rng has a single owner; hand out `split()` children
/// instead of sharing one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Unbiased integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;
  /// Independent child stream; advances this generator by one draw.
  Rng split() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// The splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace wuneng
