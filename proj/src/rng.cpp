#include "spft/rng.hpp"

#include <cmath>
#include <numeric>

#include "spft/error.hpp"

namespace spft {

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw Error(Errc::InvalidArgument, "uniform_index over an empty range");
  // rejection sampling keeps the draw unbiased
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do x = engine_();
  while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

std::size_t Rng::weighted_index(std::span<const double> weights) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(Errc::InvalidArgument, "weighted_index needs a positive finite total");
  double target = uniform01() * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    running += weights[i];
    last_positive = i;
    if (target < running) return i;
  }
  return last_positive;
}

double Rng::normal() {
  // Box-Muller; u1 is shifted away from zero
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) { return Rng(mix(seed, stream_id)); }

}  // namespace spft
