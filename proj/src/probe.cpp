#include "freezenet/probe.hpp"

#include <algorithm>

#include "freezenet/propagation.hpp"

namespace freezenet {

double mean_abs_gradient(const NetworkSpec& spec, const ParamSet& params, const FreezeMask& mask,
                         const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("gradient-flow probe needs a non-empty dataset");
  if (batch_size == 0) throw ParameterError("probe batch size must be at least 1");
  if (mask.bits.size() != params.weights().size()) {
    throw DimensionError("probe: mask does not match the weight layout");
  }
  const bool dense = mask.popcount() == mask.bits.size();
  std::span<const std::uint8_t> weight_mask;
  if (!dense) weight_mask = mask.bits;

  double total = 0.0;
  Tensor x;
  std::vector<std::int32_t> y;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    data.gather(idx, x, y);
    auto fwd = forward(spec, params, x);
    Gradients<float> g = backward(spec, params, fwd.cache, y, weight_mask);
    total += abs_sum<float>(g.weights.data());
    total += abs_sum<float>(g.biases.data());
  }
  const auto trainable = static_cast<double>(mask.popcount() + params.biases().size());
  return total / trainable;
}

GradFlowReport gradient_flow_probe(const NetworkSpec& spec, const ParamSet& params,
                                   const FreezeMask& mask, const ParamSet& dense,
                                   const Dataset& data, std::size_t batch_size) {
  GradFlowReport r;
  r.mean_abs_grad = mean_abs_gradient(spec, params, mask, data, batch_size);
  r.baseline = mean_abs_gradient(spec, dense, full_mask(spec), data, batch_size);
  r.ratio = r.baseline > 0.0 ? r.mean_abs_grad / r.baseline : 0.0;
  return r;
}

}  // namespace freezenet
