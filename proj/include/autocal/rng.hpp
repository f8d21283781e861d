#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace autocal {

/// PCG32 (XSH-RR): small, seedable and bit-portable across platforms,
/// unlike the standard-library distributions. Each (seed, stream) pair
/// yields an independent sequence.
class Pcg32 {
 public:
  Pcg32(std::uint64_t seed, std::uint64_t stream) : state_(0), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  /// Uniform double in [0, 1).
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Draws two uniforms per call and
  /// keeps no state, so draw counts stay predictable.
  double gaussian() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 1e-12;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  /// Knuth's product method; fine for the small lambdas used here.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

/// splitmix64 mixing for stream derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent RNG stream id from a purpose tag and an index.
/// Per-frame streams keep draws local: inserting extra draws in one frame
/// never shifts the sequences of other frames or purposes.
inline std::uint64_t derive_stream(std::string_view purpose, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : purpose) h = (h ^ static_cast<std::uint8_t>(c)) * 0x100000001b3ull;
  return mix64(h ^ mix64(index));
}

}  // namespace autocal
