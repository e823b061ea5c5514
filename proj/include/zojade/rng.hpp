#pragma once

// Portable pseudo-random streams.
//
// Every random quantity in the library (graphs, synthetic data, initial
// points) is drawn from xoshiro256** seeded through splitmix64, and the
// derived distributions below are written out explicitly instead of using
// <random> distributions, whose output is implementation-defined. A port in
// another language that follows the same recipe reproduces the streams.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace zojade {

/// splitmix64 (Steele, Lea, Flood 2014). Used only to expand a 64-bit seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna). State is four words of splitmix64(seed).
///
/// Derived draws:
///   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on u1 = 1 - uniform(), u2 = uniform(), using the
///                cosine branch only (one normal per two uniforms, no caching)
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // UniformRandomBitGenerator surface, for std::shuffle and friends.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next(); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

/// Independent stream for a (seed, purpose) pair, so that e.g. the data
/// stream and the initial-point stream of the same seed never overlap.
inline Rng make_stream(std::uint64_t seed, std::uint64_t purpose) {
  SplitMix64 mix(seed ^ (0xd1b54a32d192ed03ULL * (purpose + 1)));
  return Rng(mix.next());
}

namespace stream {
inline constexpr std::uint64_t kTopology = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kInitialPoints = 3;
inline constexpr std::uint64_t kVerification = 4;
}  // namespace stream

}  // namespace zojade
