#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "freezenet/data.hpp"
#include "freezenet/params.hpp"
#include "freezenet/propagation.hpp"
#include "freezenet/selection.hpp"

namespace freezenet {

enum class WeightDecayMode : std::uint8_t { trainable_only, all_weights };

std::string_view to_string(WeightDecayMode mode);
WeightDecayMode parse_weight_decay_mode(std::string_view text);

struct Seeds {
  std::uint64_t init = 1;
  std::uint64_t shuffle = 1;
  std::uint64_t rescue = 1;
  std::uint64_t reinit = 1;
  bool operator==(const Seeds&) const = default;
};

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  WeightDecayMode wd_mode = WeightDecayMode::trainable_only;
  std::size_t batch_size = 100;
  std::uint64_t lr_decay_every = 25000;  // optimizer steps
  double lr_decay_factor = 0.1;
  std::size_t epochs = 1;
  SplitRatio split;
  Seeds seeds;
  FreezeRate q;
  InitScheme init_scheme = InitScheme::xavier_normal;
  std::optional<InitScheme> reinit_scheme;  // reinitialize after masking when set
  std::size_t max_steps = 0;                // stop early after this many steps; 0 = no cap
  bool probe_each_epoch = false;            // record the gradient-flow probe in history

  // Throws ParameterError on lr <= 0, momentum outside [0, 1), batch_size 0,
  // negative weight decay, lr_decay_every 0 or an invalid q.
  void validate() const;
};

// lr * factor^(step / every), integer division.
double learning_rate_at(const TrainConfig& cfg, std::uint64_t step);

struct OptimizerState {
  ParamSet params;
  Tensor velocity_weights;
  Tensor velocity_biases;
  std::uint64_t step = 0;

  explicit OptimizerState(ParamSet initial);
};

// One SGD-momentum step with coupled L2 decay:
//   weights: e = m ⊙ dW + wd * D ⊙ W, D = m (trainable_only) or 1 (all_weights)
//   biases:  e = dB + wd * B
//   v <- momentum * v + e;  p <- p - lr_t * v
// In trainable_only mode weights with m = 0 are skipped outright, so they and
// their velocity never change. Throws UsageError on a layout mismatch.
void sgd_step(OptimizerState& state, const Gradients<float>& grads, const FreezeMask& mask,
              const TrainConfig& cfg);

}  // namespace freezenet
