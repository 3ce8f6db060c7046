#include "freezenet/optim.hpp"

#include <cmath>

namespace freezenet {

std::string_view to_string(WeightDecayMode mode) {
  switch (mode) {
    case WeightDecayMode::trainable_only: return "trainable_only";
    case WeightDecayMode::all_weights: return "all_weights";
  }
  return "unknown";
}

WeightDecayMode parse_weight_decay_mode(std::string_view text) {
  if (text == "trainable_only" || text == "trainable") return WeightDecayMode::trainable_only;
  if (text == "all_weights" || text == "all") return WeightDecayMode::all_weights;
  throw ParameterError("unknown weight-decay mode '" + std::string(text) +
                       "' (expected trainable_only or all_weights)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ParameterError("weight decay must be non-negative");
  }
  if (batch_size == 0) throw ParameterError("batch size must be at least 1");
  if (lr_decay_every == 0) throw ParameterError("lr decay interval must be at least 1 step");
  if (!(lr_decay_factor > 0.0)) throw ParameterError("lr decay factor must be positive");
  if (split.train == 0 || split.val == 0) throw ParameterError("split sides must be positive");
  q.validate();
}

double learning_rate_at(const TrainConfig& cfg, std::uint64_t step) {
  const std::uint64_t drops = step / cfg.lr_decay_every;
  double lr = cfg.lr;
  for (std::uint64_t i = 0; i < drops; ++i) lr *= cfg.lr_decay_factor;
  return lr;
}

OptimizerState::OptimizerState(ParamSet initial)
    : params(std::move(initial)),
      velocity_weights(Shape{params.weights().size()}),
      velocity_biases(Shape{params.biases().size()}) {}

void sgd_step(OptimizerState& state, const Gradients<float>& grads, const FreezeMask& mask,
              const TrainConfig& cfg) {
  const std::size_t nw = state.params.weights().size();
  const std::size_t nb = state.params.biases().size();
  if (grads.weights.size() != nw || grads.biases.size() != nb || mask.bits.size() != nw ||
      state.velocity_weights.size() != nw || state.velocity_biases.size() != nb) {
    throw UsageError("sgd_step: gradients, mask and parameters disagree on the layout");
  }
  const auto lr = static_cast<float>(learning_rate_at(cfg, state.step));
  const auto mu = static_cast<float>(cfg.momentum);
  const auto wd = static_cast<float>(cfg.weight_decay);
  const bool decay_all = cfg.wd_mode == WeightDecayMode::all_weights;

  float* w = state.params.mutable_weights().raw();
  float* vw = state.velocity_weights.raw();
  const float* gw = grads.weights.raw();
  const std::uint8_t* m = mask.bits.data();
  for (std::size_t i = 0; i < nw; ++i) {
    float e;
    if (m[i]) {
      e = gw[i] + wd * w[i];
    } else if (decay_all) {
      e = wd * w[i];
    } else {
      continue;
    }
    vw[i] = mu * vw[i] + e;
    w[i] = w[i] - lr * vw[i];
  }

  float* b = state.params.mutable_biases().raw();
  float* vb = state.velocity_biases.raw();
  const float* gb = grads.biases.raw();
  for (std::size_t i = 0; i < nb; ++i) {
    vb[i] = mu * vb[i] + (gb[i] + wd * b[i]);
    b[i] = b[i] - lr * vb[i];
  }
  ++state.step;
}

}  // namespace freezenet
