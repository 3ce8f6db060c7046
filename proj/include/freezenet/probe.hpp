#pragma once

#include "freezenet/data.hpp"
#include "freezenet/network.hpp"
#include "freezenet/params.hpp"
#include "freezenet/selection.hpp"

namespace freezenet {

struct GradFlowReport {
  double mean_abs_grad = 0.0;  // this network
  double baseline = 0.0;       // dense reference
  double ratio = 0.0;          // mean_abs_grad / baseline (0 when the baseline is 0)
};

// Sum over all batches of |m ⊙ dW|_1 + |dB|_1, taken batch by batch in data
// order, divided by popcount(m) + |B|.
double mean_abs_gradient(const NetworkSpec& spec, const ParamSet& params, const FreezeMask& mask,
                         const Dataset& data, std::size_t batch_size = 100);

// Probes `params` under `mask` and, as the reference, `dense` under the
// all-ones mask.
GradFlowReport gradient_flow_probe(const NetworkSpec& spec, const ParamSet& params,
                                   const FreezeMask& mask, const ParamSet& dense,
                                   const Dataset& data, std::size_t batch_size = 100);

}  // namespace freezenet
