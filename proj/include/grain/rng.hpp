#ifndef GRAIN_RNG_HPP
#define GRAIN_RNG_HPP

#include <array>
#include <cstdint>

namespace grain {

/// Deterministic pseudo-random generator: xoshiro256** whose 256-bit state
/// is filled from four consecutive SplitMix64 outputs of the seed.
///
/// Every derived quantity (uniform reals, bounded integers, normals) is
/// computed here with fixed arithmetic rather than through <random>
/// distributions, whose algorithms differ between standard libraries. The
/// same seed therefore yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform in [lo, hi). Throws RangeError unless lo < hi.
  double uniform(double lo, double hi);

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  const std::array<std::uint64_t, 4>& state() const { return state_; }

 private:
  std::array<std::uint64_t, 4> state_;
};

/// SplitMix64 step; advances `x` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& x);

/// Combines a base seed with two stream coordinates into a new seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace grain

#endif  // GRAIN_RNG_HPP
