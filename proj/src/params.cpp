#include "freezenet/params.hpp"

#include <atomic>
#include <cmath>

namespace freezenet {

namespace {

std::atomic<std::uint64_t> g_generation{0};

}  // namespace

template <typename T>
BasicParamSet<T>::BasicParamSet(const ParamLayout& layout)
    : layout_(layout),
      weights_(Shape{layout.weight_count}),
      biases_(Shape{layout.bias_count}),
      generation_(++g_generation) {}

template <typename T>
void BasicParamSet<T>::touch() noexcept {
  generation_ = ++g_generation;
}

template <typename T>
BasicTensor<T>& BasicParamSet<T>::mutable_weights() noexcept {
  touch();
  return weights_;
}

template <typename T>
BasicTensor<T>& BasicParamSet<T>::mutable_biases() noexcept {
  touch();
  return biases_;
}

template <typename T>
std::span<const T> BasicParamSet<T>::layer_weights(std::size_t slice) const {
  const ParamSlice& s = layout_.slices.at(slice);
  return weights_.data().subspan(s.weight_offset, s.weight_count);
}

template <typename T>
std::span<const T> BasicParamSet<T>::layer_biases(std::size_t slice) const {
  const ParamSlice& s = layout_.slices.at(slice);
  return biases_.data().subspan(s.bias_offset, s.bias_count);
}

template <typename T>
std::span<T> BasicParamSet<T>::mutable_layer_weights(std::size_t slice) {
  const ParamSlice& s = layout_.slices.at(slice);
  touch();
  return weights_.data().subspan(s.weight_offset, s.weight_count);
}

template <typename T>
std::span<T> BasicParamSet<T>::mutable_layer_biases(std::size_t slice) {
  const ParamSlice& s = layout_.slices.at(slice);
  touch();
  return biases_.data().subspan(s.bias_offset, s.bias_count);
}

template class BasicParamSet<float>;
template class BasicParamSet<double>;

std::string_view to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::xavier_normal: return "xavier_normal";
    case InitScheme::kaiming_uniform: return "kaiming_uniform";
    case InitScheme::pm_sigma: return "pm_sigma";
  }
  return "unknown";
}

InitScheme parse_init_scheme(std::string_view text) {
  if (text == "xavier_normal" || text == "X") return InitScheme::xavier_normal;
  if (text == "kaiming_uniform" || text == "K") return InitScheme::kaiming_uniform;
  if (text == "pm_sigma") return InitScheme::pm_sigma;
  throw ParameterError("unknown init scheme '" + std::string(text) + "'");
}

template <typename T>
BasicParamSet<T> init_params(const NetworkSpec& spec, InitScheme scheme, RngStream& stream) {
  if (stream.purpose() != RngPurpose::init && stream.purpose() != RngPurpose::reinit) {
    throw UsageError("init_params needs an init or reinit stream, got " +
                     std::string(to_string(stream.purpose())));
  }
  const ParamLayout& layout = spec.layout();
  BasicParamSet<T> params(layout);
  for (std::size_t s = 0; s < layout.slices.size(); ++s) {
    const ParamSlice& slice = layout.slices[s];
    std::span<T> w = params.mutable_layer_weights(s);
    const double sigma = std::sqrt(2.0 / static_cast<double>(slice.fan_in + slice.fan_out));
    switch (scheme) {
      case InitScheme::xavier_normal: {
        auto draw = rng_normal<T>(stream, 0.0, sigma, w.size());
        std::copy(draw.data().begin(), draw.data().end(), w.begin());
        break;
      }
      case InitScheme::kaiming_uniform: {
        const double bound = std::sqrt(6.0 / static_cast<double>(slice.fan_in));
        auto draw = rng_uniform<T>(stream, -bound, bound, w.size());
        std::copy(draw.data().begin(), draw.data().end(), w.begin());
        break;
      }
      case InitScheme::pm_sigma: {
        const T value = static_cast<T>(sigma);
        for (T& x : w) x = (stream.next_u64() >> 63) ? value : -value;
        break;
      }
    }
  }
  return params;
}

template ParamSet init_params<float>(const NetworkSpec&, InitScheme, RngStream&);
template ParamSet64 init_params<double>(const NetworkSpec&, InitScheme, RngStream&);

}  // namespace freezenet
