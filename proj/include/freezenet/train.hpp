#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "freezenet/data.hpp"
#include "freezenet/optim.hpp"
#include "freezenet/selection.hpp"

namespace freezenet {

// baseline:      dense SGD, mask all ones
// freezenet:     SNIP saliency mask; non-kept weights stay at their init
// freezenet_wd:  freezenet with weight decay on every weight (forces all_weights)
// snip:          SNIP saliency mask; non-kept weights zeroed (pruned)
// grasp_prune:   GraSP importance mask; non-kept weights zeroed
// random_freeze: uniformly random mask; non-kept weights stay at their init
enum class TrainMode : std::uint8_t { baseline, freezenet, freezenet_wd, snip, grasp_prune, random_freeze };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);
bool prunes(TrainMode mode) noexcept;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // rate in force at the last step of the epoch
  std::optional<double> grad_flow;
  double max_frozen_magnitude = 0.0;
};

// epoch,train_loss,train_acc,val_acc,lr,grad_flow,max_frozen_magnitude with
// shortest round-trip number formatting; grad_flow is blank when not probed.
std::string history_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
  FreezeMask mask;
  ParamSet initial;  // parameters at step 0, after masking, reinit and pruning
  ParamSet best_snapshot;
  ParamSet final_params;
  std::size_t epoch_of_best = 0;  // 0 when no epoch completed
  double best_val_acc = 0.0;
  std::optional<double> test_acc;  // evaluated on best_snapshot
  std::vector<EpochRecord> history;
  std::uint64_t steps = 0;
  WeightDecayMode wd_mode = WeightDecayMode::trainable_only;  // as applied
  // What regenerates `initial` for non-kept weights.
  InitScheme regen_scheme = InitScheme::xavier_normal;
  RngPurpose regen_purpose = RngPurpose::init;
  std::uint64_t regen_seed = 0;
};

// Everything fixed before the first optimizer step.
struct PreparedRun {
  TrainConfig cfg;  // effective: baseline forces q = 0, freezenet_wd forces all_weights
  Dataset train_data;
  Dataset val_data;
  RngStream shuffle{0, RngPurpose::shuffle};  // continues into the epoch orderings
  std::vector<std::size_t> first_order;       // epoch-1 ordering; its first batch scores the mask
  ParamSet dense;   // the initialization before reinit and pruning
  ParamSet params;  // after reinit and pruning
  FreezeMask mask;
  InitScheme regen_scheme = InitScheme::xavier_normal;
  RngPurpose regen_purpose = RngPurpose::init;
  std::uint64_t regen_seed = 0;
};

PreparedRun prepare_run(const NetworkSpec& spec, const TrainConfig& cfg, const Dataset& train_set,
                        TrainMode mode);

struct TrainHooks {
  std::function<void(const OptimizerState&)> after_step;
};

// Full protocol: split `train_set` by cfg.split under the shuffle stream,
// initialize from the init stream, score on the first batch of the epoch-1
// ordering, build the mask, optionally reinitialize, zero pruned weights,
// then train with validation-based early stopping (ties keep the earliest
// epoch). `test_set` may be empty.
TrainResult train(const NetworkSpec& spec, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset& test_set, TrainMode mode, const TrainHooks& hooks = {});

// Fresh parameters under `scheme` from a reinit-purpose stream. The mask is
// not touched; it only has to match the layout.
ParamSet reinitialize(const NetworkSpec& spec, const FreezeMask& mask, InitScheme scheme,
                      RngStream& reinit_stream);

// Fraction of correctly classified examples.
double evaluate_accuracy(const NetworkSpec& spec, const ParamSet& params, const Dataset& data,
                         std::size_t batch_size = 1000);

}  // namespace freezenet
