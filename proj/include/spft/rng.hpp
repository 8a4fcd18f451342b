#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace spft {

/// Seeded random source. The draw helpers are implemented here rather than
/// through <random> distributions so sequences are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Index drawn proportionally to nonnegative weights; the total must be positive.
  std::size_t weighted_index(std::span<const double> weights);

  double normal();

  /// Independent stream for (seed, stream) derived with splitmix64.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream_id);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace spft
