#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>

namespace ranslicer {

/// Counter-based substream generator. Every stream is keyed by a
/// (seed, tag, a, b, c) tuple, so independently keyed streams can be drawn
/// in any order (or concurrently) and still produce identical values.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
            std::uint64_t b = 0, std::uint64_t c = 0) {
    state_ = mix(seed + 0x9E3779B97F4A7C15ULL);
    state_ = mix(state_ ^ tag);
    state_ = mix(state_ ^ a);
    state_ = mix(state_ ^ b);
    state_ = mix(state_ ^ c);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform draw in (0, 1].
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circularly-symmetric complex normal CN(0, 1).
  std::complex<double> cnormal() {
    const double re = normal();
    const double im = normal();
    return {re * 0.70710678118654752440, im * 0.70710678118654752440};
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// FNV-1a of a string literal, usable as a stream tag.
  static constexpr std::uint64_t tag(std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char ch : name) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ranslicer
