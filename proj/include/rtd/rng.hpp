#pragma once

// Portable pseudo-random streams. Every random quantity in the library is
// derived from these so that seeds reproduce bit-identical results.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rtd {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// The (stream + 1)-th output of a splitmix64 sequence started at `seed`.
/// Used to derive independent child seeds: splitmix64_at(seed, 0),
/// splitmix64_at(seed, 1), ... are the first outputs of SplitMix64(seed).
constexpr std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64_mix(seed + (stream + 1) * kGoldenGamma);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return splitmix64_mix(state_);
  }
  constexpr std::uint64_t operator()() noexcept { return next(); }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  /// Uniform integer in [0, bound) by multiply-shift (Lemire without rejection).
  constexpr std::uint64_t bounded(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Standard normal deviates by Box–Muller over SplitMix64 uniforms.
/// Values come in pairs (cos branch first, then sin branch).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) noexcept : gen_(seed) {}

  double next() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - gen_.uniform();  // (0, 1]
    const double u2 = gen_.uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  SplitMix64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rtd
