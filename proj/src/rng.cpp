#include "freezenet/rng.hpp"

#include <cmath>
#include <numbers>

namespace freezenet {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t kPurposeSalt[] = {
    0x243F6A8885A308D3ULL,  // init
    0x13198A2E03707344ULL,  // shuffle
    0xA4093822299F31D0ULL,  // rescue
    0x082EFA98EC4E6C89ULL,  // reinit
};

std::uint64_t salt_for(RngPurpose purpose) {
  const auto index = static_cast<std::size_t>(purpose);
  if (index >= std::size(kPurposeSalt)) throw ParameterError("unknown rng purpose");
  return kPurposeSalt[index];
}

}  // namespace

std::string_view to_string(RngPurpose purpose) {
  switch (purpose) {
    case RngPurpose::init: return "init";
    case RngPurpose::shuffle: return "shuffle";
    case RngPurpose::rescue: return "rescue";
    case RngPurpose::reinit: return "reinit";
  }
  return "unknown";
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

RngStream::RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t counter)
    : seed_(seed),
      purpose_(purpose),
      key_(mix64(seed ^ salt_for(purpose))),
      counter_(counter) {}

std::uint64_t RngStream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::next_unit() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("uniform_below: bound must be positive");
  unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

template <typename T>
BasicTensor<T> rng_uniform(RngStream& stream, double lo, double hi, std::size_t n) {
  if (!(lo < hi)) throw ParameterError("rng_uniform: requires lo < hi");
  BasicTensor<T> out(Shape{n});
  const T upper = static_cast<T>(hi);
  const T below_upper = std::nextafter(upper, static_cast<T>(lo));
  for (std::size_t i = 0; i < n; ++i) {
    T v = static_cast<T>(lo + (hi - lo) * stream.next_unit());
    out[i] = v >= upper ? below_upper : v;
  }
  return out;
}

template <typename T>
BasicTensor<T> rng_normal(RngStream& stream, double mean, double std, std::size_t n) {
  if (!(std > 0.0)) throw ParameterError("rng_normal: requires std > 0");
  BasicTensor<T> out(Shape{n});
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 = 1.0 - stream.next_unit();  // (0, 1]
    const double u2 = stream.next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    out[i] = static_cast<T>(mean + std * (r * std::cos(theta)));
    if (i + 1 < n) out[i + 1] = static_cast<T>(mean + std * (r * std::sin(theta)));
  }
  return out;
}

template BasicTensor<float> rng_uniform<float>(RngStream&, double, double, std::size_t);
template BasicTensor<double> rng_uniform<double>(RngStream&, double, double, std::size_t);
template BasicTensor<float> rng_normal<float>(RngStream&, double, double, std::size_t);
template BasicTensor<double> rng_normal<double>(RngStream&, double, double, std::size_t);

}  // namespace freezenet
