#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "gepc/tensor.hpp"

namespace gepc {

/// Counter-based generator ("SplitMix64-CTR").
///
/// A stream is named by (seed, a, b), where a is the sample index and b the
/// draw index under the stream-splitting rule. Word n of the stream is
///
///   key  = mix64(mix64(seed ^ 0x243F6A8885A308D3) + a * 0x9E3779B97F4A7C15
///                                                  + b * 0xD1B54A32D192ED03)
///   word = mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
///
/// with mix64 the SplitMix64 finaliser (shifts 30/27/31, multipliers
/// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB), all arithmetic mod 2^64.
/// Uniforms use the top 53 bits: u = ((word >> 11) + 0.5) * 2^-53 in (0, 1).
/// Normals come from Box-Muller on consecutive uniform pairs (u1, u2):
/// z_even = r cos(2 pi u2), z_odd = r sin(2 pi u2), r = sqrt(-2 ln u1).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
      : key_(mix64(mix64(seed ^ 0x243F6A8885A308D3ULL) + a * 0x9E3779B97F4A7C15ULL +
                   b * 0xD1B54A32D192ED03ULL)) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Index in [0, n) drawn from one uniform.
  std::size_t below(std::size_t n) {
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  Field normal_field(const Shape& shape) {
    Field f(shape);
    for (auto& v : f.array()) v = normal();
    return f;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Seed domains so unrelated consumers of one experiment seed never share a
// stream.
namespace seed_domain {
inline constexpr std::uint64_t kForwardNoise = 0x4e4f495345ULL;
inline constexpr std::uint64_t kSynthSamples = 0x53414d504cULL;
inline constexpr std::uint64_t kSynthMixture = 0x4d49585455ULL;
inline constexpr std::uint64_t kSynthShift = 0x5348494654ULL;
inline constexpr std::uint64_t kTheory = 0x5448454f52ULL;
inline constexpr std::uint64_t kErrorField = 0x4552524f52ULL;
}  // namespace seed_domain

}  // namespace gepc
