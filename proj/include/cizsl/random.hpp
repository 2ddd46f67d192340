#pragma once

#include <array>
#include <cstdint>

namespace cizsl {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter), so streams are reproducible across
/// platforms and compilers.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Random stream over Philox4x32-10. A stream is identified by a 64-bit seed
/// (the key) and a 32-bit stream id (the top counter word), so independent
/// consumers can draw from non-overlapping sequences of the same seed.
///
/// Distributions are implemented here rather than with <random> so that
/// sequences do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint32_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t seed() const { return seed_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cizsl
