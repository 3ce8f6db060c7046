#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "freezenet/network.hpp"
#include "freezenet/params.hpp"
#include "freezenet/tensor.hpp"

namespace freezenet {

// Everything the backward pass needs from a forward pass.
template <typename T>
struct ActivationCache {
  std::size_t batch = 0;
  std::uint64_t generation = 0;  // ParamSet generation at forward time
  std::size_t weight_count = 0;
  // activations[0] is the input; activations[i + 1] is the output of layer i.
  std::vector<BasicTensor<T>> activations;
  // conv2d layers: im2col buffers, one [K x P] block per sample.
  std::vector<std::vector<T>> columns;
  // maxpool2d layers: per output element, the winning flat input index within its sample.
  std::vector<std::vector<std::uint32_t>> argmax;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> log_probs;  // [batch x classes]
  ActivationCache<T> cache;
};

template <typename T>
struct Gradients {
  BasicTensor<T> weights;  // aligned with ParamSet::weights()
  BasicTensor<T> biases;   // aligned with ParamSet::biases()
  double loss = 0.0;       // mean NLL of the batch
};

// x is [batch x C x H x W] (or any shape whose trailing size matches the
// network input). Returns log-softmax outputs and the cache for backward.
template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const BasicParamSet<T>& params,
                         const BasicTensor<T>& x);

// Forward pass without retaining the cache.
template <typename T>
BasicTensor<T> predict(const NetworkSpec& spec, const BasicParamSet<T>& params,
                       const BasicTensor<T>& x);

// Gradients of the mean negative log-likelihood. When `weight_mask` is
// non-empty, only weight gradients with mask 1 are computed; the rest are
// returned as 0 (m ⊙ dW). Computed entries are bit-identical either way.
template <typename T>
Gradients<T> backward(const NetworkSpec& spec, const BasicParamSet<T>& params,
                      const ActivationCache<T>& cache, std::span<const std::int32_t> labels,
                      std::span<const std::uint8_t> weight_mask = {});

template <typename T>
double nll_loss(const BasicTensor<T>& log_probs, std::span<const std::int32_t> labels);

// Number of rows whose argmax (lowest index on ties) equals the label.
template <typename T>
std::size_t count_correct(const BasicTensor<T>& log_probs, std::span<const std::int32_t> labels);

}  // namespace freezenet
