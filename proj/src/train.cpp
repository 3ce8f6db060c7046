#include "freezenet/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

#include "freezenet/probe.hpp"
#include "freezenet/propagation.hpp"

namespace freezenet {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::freezenet: return "freezenet";
    case TrainMode::freezenet_wd: return "freezenet_wd";
    case TrainMode::snip: return "snip";
    case TrainMode::grasp_prune: return "grasp_prune";
    case TrainMode::random_freeze: return "random_freeze";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view text) {
  for (auto m : {TrainMode::baseline, TrainMode::freezenet, TrainMode::freezenet_wd, TrainMode::snip,
                 TrainMode::grasp_prune, TrainMode::random_freeze}) {
    if (text == to_string(m)) return m;
  }
  if (text == "grasp") return TrainMode::grasp_prune;
  if (text == "random") return TrainMode::random_freeze;
  throw ParameterError("unknown mode '" + std::string(text) + "'");
}

bool prunes(TrainMode mode) noexcept {
  return mode == TrainMode::snip || mode == TrainMode::grasp_prune;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

double max_frozen_magnitude(const ParamSet& params, const FreezeMask& mask) {
  double m = 0.0;
  const auto w = params.weights().data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!mask.bits[i]) m = std::max(m, static_cast<double>(std::abs(w[i])));
  }
  return m;
}

}  // namespace

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,train_acc,val_acc,lr,grad_flow,max_frozen_magnitude\n";
  for (const EpochRecord& r : history) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.train_acc, r.val_acc, r.lr}) {
      out += ',';
      append_number(out, v);
    }
    out += ',';
    if (r.grad_flow) append_number(out, *r.grad_flow);
    out += ',';
    append_number(out, r.max_frozen_magnitude);
    out += '\n';
  }
  return out;
}

ParamSet reinitialize(const NetworkSpec& spec, const FreezeMask& mask, InitScheme scheme,
                      RngStream& reinit_stream) {
  if (reinit_stream.purpose() != RngPurpose::reinit) {
    throw UsageError("reinitialize needs a reinit stream");
  }
  if (mask.bits.size() != spec.layout().weight_count) {
    throw DimensionError("reinitialize: mask does not match the weight layout");
  }
  return init_params<float>(spec, scheme, reinit_stream);
}

double evaluate_accuracy(const NetworkSpec& spec, const ParamSet& params, const Dataset& data,
                         std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate accuracy on an empty dataset");
  std::size_t correct = 0;
  Tensor x;
  std::vector<std::int32_t> y;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    data.gather(idx, x, y);
    correct += count_correct(predict(spec, params, x), y);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

PreparedRun prepare_run(const NetworkSpec& spec, const TrainConfig& cfg_in, const Dataset& train_set,
                        TrainMode mode) {
  PreparedRun run;
  TrainConfig& cfg = run.cfg;
  cfg = cfg_in;
  if (mode == TrainMode::baseline) cfg.q = FreezeRate::zero();
  if (mode == TrainMode::freezenet_wd) cfg.wd_mode = WeightDecayMode::all_weights;
  cfg.validate();
  if (train_set.size() == 0) throw DataError("training set is empty");

  run.shuffle = RngStream(cfg.seeds.shuffle, RngPurpose::shuffle);
  std::tie(run.train_data, run.val_data) = split_shuffle(train_set, cfg.split, run.shuffle);

  run.regen_scheme = cfg.init_scheme;
  run.regen_purpose = RngPurpose::init;
  run.regen_seed = cfg.seeds.init;
  RngStream init_stream(cfg.seeds.init, RngPurpose::init);
  run.dense = init_params<float>(spec, cfg.init_scheme, init_stream);

  run.first_order = shuffled_indices(run.train_data.size(), run.shuffle);
  Tensor x;
  std::vector<std::int32_t> y;
  const std::size_t first_batch = std::min(cfg.batch_size, run.train_data.size());
  auto saliency_batch = [&] { run.train_data.gather(std::span(run.first_order).first(first_batch), x, y); };

  RngStream rescue(cfg.seeds.rescue, RngPurpose::rescue);
  switch (mode) {
    case TrainMode::baseline:
      run.mask = full_mask(spec);
      break;
    case TrainMode::freezenet:
    case TrainMode::freezenet_wd:
    case TrainMode::snip:
      saliency_batch();
      run.mask = build_mask(snip_scores(spec, run.dense, x, y), cfg.q, spec, rescue);
      break;
    case TrainMode::grasp_prune:
      saliency_batch();
      run.mask = build_mask(grasp_scores(spec, run.dense, x, y), cfg.q, spec, rescue);
      break;
    case TrainMode::random_freeze:
      run.mask = build_mask(random_scores(spec, rescue), cfg.q, spec, rescue);
      break;
  }

  run.params = run.dense;
  if (cfg.reinit_scheme) {
    RngStream reinit(cfg.seeds.reinit, RngPurpose::reinit);
    run.params = reinitialize(spec, run.mask, *cfg.reinit_scheme, reinit);
    run.regen_scheme = *cfg.reinit_scheme;
    run.regen_purpose = RngPurpose::reinit;
    run.regen_seed = cfg.seeds.reinit;
  }
  if (prunes(mode)) {
    auto& w = run.params.mutable_weights();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!run.mask.bits[i]) w[i] = 0.0f;
  }
  return run;
}

TrainResult train(const NetworkSpec& spec, const TrainConfig& cfg_in, const Dataset& train_set,
                  const Dataset& test_set, TrainMode mode, const TrainHooks& hooks) {
  PreparedRun run = prepare_run(spec, cfg_in, train_set, mode);
  const TrainConfig& cfg = run.cfg;
  const Dataset& train_data = run.train_data;

  TrainResult result;
  result.wd_mode = cfg.wd_mode;
  result.regen_scheme = run.regen_scheme;
  result.regen_purpose = run.regen_purpose;
  result.regen_seed = run.regen_seed;
  result.mask = std::move(run.mask);
  result.initial = run.params;
  result.best_snapshot = run.params;

  const FreezeMask& mask = result.mask;
  const bool dense = mask.popcount() == mask.size();
  std::span<const std::uint8_t> grad_mask;
  if (!dense) grad_mask = mask.bits;

  std::vector<std::size_t> order = std::move(run.first_order);
  Tensor x;
  std::vector<std::int32_t> y;
  OptimizerState state(std::move(run.params));
  bool have_best = false;
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    if (epoch > 1) order = shuffled_indices(train_data.size(), run.shuffle);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      train_data.gather(std::span(order).subspan(start, end - start), x, y);
      auto fwd = forward(spec, state.params, x);
      Gradients<float> g = backward(spec, state.params, fwd.cache, y, grad_mask);
      if (!std::isfinite(g.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(state.step + 1));
      }
      loss_sum += g.loss * static_cast<double>(y.size());
      correct += count_correct(fwd.log_probs, y);
      seen += y.size();
      sgd_step(state, g, mask, cfg);
      if (hooks.after_step) hooks.after_step(state);
      if (cfg.max_steps != 0 && state.step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    rec.val_acc = evaluate_accuracy(spec, state.params, run.val_data);
    rec.lr = learning_rate_at(cfg, state.step == 0 ? 0 : state.step - 1);
    if (cfg.probe_each_epoch) rec.grad_flow = mean_abs_gradient(spec, state.params, mask, train_data);
    rec.max_frozen_magnitude = max_frozen_magnitude(state.params, mask);
    result.history.push_back(rec);

    if (!have_best || rec.val_acc > result.best_val_acc) {
      have_best = true;
      result.best_val_acc = rec.val_acc;
      result.epoch_of_best = epoch;
      result.best_snapshot = state.params;
    }
  }

  result.steps = state.step;
  result.final_params = std::move(state.params);
  if (test_set.size() > 0) result.test_acc = evaluate_accuracy(spec, result.best_snapshot, test_set);
  return result;
}

}  // namespace freezenet
