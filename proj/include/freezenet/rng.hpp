#pragma once

#include <cstdint>
#include <string_view>

#include "freezenet/tensor.hpp"

namespace freezenet {

// Each purpose gets its own stream key, so draws for shuffling can never
// perturb the weights regenerated from the init seed.
enum class RngPurpose : std::uint8_t { init = 0, shuffle = 1, rescue = 2, reinit = 3 };

std::string_view to_string(RngPurpose purpose);

// Counter-mode SplitMix64. The n-th 64-bit output of a stream is
//
//   key    = mix64(seed ^ salt[purpose])
//   out[n] = mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. The sampler is part of the
// checkpoint format: frozen weights are regenerated from it, so any change
// here is a format break. See "Checkpoint format" in README.md.
class RngStream {
 public:
  RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t counter = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  RngPurpose purpose() const noexcept { return purpose_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // Top 53 bits scaled into [0, 1).
  double next_unit() noexcept;
  // Uniform integer in [0, bound) by multiply-shift with rejection (Lemire).
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  RngPurpose purpose_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

// n draws from U[lo, hi), one 64-bit output each, computed in double and
// rounded to T (clamped below hi after rounding).
template <typename T>
BasicTensor<T> rng_uniform(RngStream& stream, double lo, double hi, std::size_t n);

// n draws from N(mean, std^2) via Box-Muller. Each pair of uniforms
// (u1, u2) yields r*cos(2*pi*u2) then r*sin(2*pi*u2), r = sqrt(-2 ln(1-u1)),
// consumed in that order. An odd n discards the final sine.
template <typename T>
BasicTensor<T> rng_normal(RngStream& stream, double mean, double std, std::size_t n);

}  // namespace freezenet
