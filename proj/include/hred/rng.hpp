#pragma once

#include <cstdint>

namespace hred {

/// Counter-based generator: draw k is the SplitMix64 finalizer applied to
/// `seed + k * 0x9E3779B97F4A7C15`. The integer stream depends only on the
/// seed and the draw index, so it is identical on every platform.
///
/// Gaussian draws use Box-Muller on top of the uniform stream. Those go
/// through libm (log, cos, sin) and may differ in the last ulp between
/// C libraries; the integer and uniform streams never do.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  /// A generator for an independent sub-stream, e.g. one per epoch.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hred
