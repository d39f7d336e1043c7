#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lyaprnn {

/// Identifies one reproducible random object: a base seed shared by a whole
/// run plus a per-object stream id (weights, each input sequence, and each
/// initial state get distinct streams; see README "Reproducibility").
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// SplitMix64 output function; used to spread (seed, stream) into engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic random source with bit-identical output on every platform.
///
/// The algorithm is a compatibility contract (README "Reproducibility"); any
/// change requires a major version bump:
///   engine   : std::mt19937_64 seeded with splitmix64(splitmix64(seed) + stream)
///   uniform01: top 53 bits of one engine draw, scaled by 2^-53  ->  [0, 1)
///   uniform  : lo + (hi - lo) * uniform01
///   normal   : Box-Muller, z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2),
///              consuming exactly two uniform01 draws per sample
/// Standard-library distributions are avoided on purpose: their output is
/// implementation-defined, the mt19937_64 engine itself is not.
class Rng {
 public:
  explicit Rng(RngSpec spec)
      : engine_(splitmix64(splitmix64(spec.seed) + spec.stream)) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double sigma2) { return std::sqrt(sigma2) * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lyaprnn
