#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "freezenet/network.hpp"
#include "freezenet/rng.hpp"
#include "freezenet/tensor.hpp"

namespace freezenet {

// Flat parameter store Θ = W ∪ B with per-layer views.
//
// Every call that hands out mutable storage bumps `generation()`. Activation
// caches remember the generation they were computed against, so a backward
// pass over parameters that may have changed since the forward is rejected.
template <typename T>
class BasicParamSet {
 public:
  BasicParamSet() = default;
  explicit BasicParamSet(const ParamLayout& layout);

  const ParamLayout& layout() const noexcept { return layout_; }

  const BasicTensor<T>& weights() const noexcept { return weights_; }
  const BasicTensor<T>& biases() const noexcept { return biases_; }
  BasicTensor<T>& mutable_weights() noexcept;
  BasicTensor<T>& mutable_biases() noexcept;

  std::span<const T> layer_weights(std::size_t slice) const;
  std::span<const T> layer_biases(std::size_t slice) const;
  std::span<T> mutable_layer_weights(std::size_t slice);
  std::span<T> mutable_layer_biases(std::size_t slice);

  std::uint64_t generation() const noexcept { return generation_; }

  template <typename U>
  BasicParamSet<U> cast() const {
    BasicParamSet<U> out(layout_);
    out.mutable_weights() = weights_.template cast<U>();
    out.mutable_biases() = biases_.template cast<U>();
    return out;
  }

  bool bitwise_equal(const BasicParamSet& other) const {
    return weights_.bitwise_equal(other.weights_) && biases_.bitwise_equal(other.biases_);
  }

 private:
  void touch() noexcept;

  ParamLayout layout_;
  BasicTensor<T> weights_;
  BasicTensor<T> biases_;
  std::uint64_t generation_ = 0;
};

using ParamSet = BasicParamSet<float>;
using ParamSet64 = BasicParamSet<double>;

enum class InitScheme : std::uint8_t { xavier_normal = 0, kaiming_uniform = 1, pm_sigma = 2 };

std::string_view to_string(InitScheme scheme);
InitScheme parse_init_scheme(std::string_view text);

// Draws weights layer by layer in architecture order from `stream`; biases are 0.
//   xavier_normal:   N(0, 2/(fan_in+fan_out))
//   kaiming_uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in))
//   pm_sigma:        +sigma or -sigma (top bit of one draw each), sigma^2 = 2/(fan_in+fan_out)
// The stream must have purpose init or reinit.
template <typename T>
BasicParamSet<T> init_params(const NetworkSpec& spec, InitScheme scheme, RngStream& stream);

}  // namespace freezenet
