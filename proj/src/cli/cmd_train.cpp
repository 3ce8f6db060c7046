#include <cmath>
#include <iostream>
#include <memory>

#include "commands.hpp"
#include "freezenet/checkpoint.hpp"
#include "freezenet/propagation.hpp"

namespace freezenet::cli {

using nlohmann::ordered_json;

namespace {

struct TrainFlags {
  std::string manifest;
  std::string arch = "lenet5caffe";
  std::string mode = "freezenet";
  std::string q;
  std::size_t epochs = 1;
  double lr = 0.1;
  double momentum = 0.9;
  double wd = 5e-4;
  std::string wd_mode;
  std::string split = "9/1";
  std::size_t batch_size = 100;
  std::uint64_t lr_decay_every = 25000;
  double lr_decay_factor = 0.1;
  std::size_t max_steps = 0;
  std::string init_scheme = "xavier_normal";
  std::string reinit_scheme;
  bool probe_each_epoch = false;
  SeedFlags seeds;
  DataFlags data;
  std::string out_dir;
  bool f64_verify = false;
};

struct VerifyReport {
  double fd_max_rel_err = 0.0;
  double f32_f64_max_abs_diff = 0.0;
  std::size_t coordinates = 0;
};

// Double-precision spot check on the initial network: backward against
// central differences on a spread of weight coordinates, plus the float
// gradient against the double one.
VerifyReport verify_f64(const NetworkSpec& spec, const ParamSet& params, const Dataset& data) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::min<std::size_t>(8, data.size()); ++i) idx.push_back(i);
  Tensor x;
  std::vector<std::int32_t> y;
  data.gather(idx, x, y);
  const Tensor64 x64 = x.cast<double>();
  ParamSet64 p64 = params.cast<double>();

  auto f64 = forward(spec, p64, x64);
  const Gradients<double> g64 = backward(spec, p64, f64.cache, y);
  auto f32 = forward(spec, params, x);
  const Gradients<float> g32 = backward(spec, params, f32.cache, y);

  VerifyReport r;
  for (std::size_t i = 0; i < g32.weights.size(); ++i) {
    r.f32_f64_max_abs_diff =
        std::max(r.f32_f64_max_abs_diff, std::abs(static_cast<double>(g32.weights[i]) - g64.weights[i]));
  }
  const std::size_t n = p64.weights().size();
  const std::size_t samples = std::min<std::size_t>(24, n);
  const double eps = 1e-5;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = s * (n / samples);
    const double w0 = p64.weights()[i];
    p64.mutable_weights()[i] = w0 + eps;
    const double lp = nll_loss(predict(spec, p64, x64), y);
    p64.mutable_weights()[i] = w0 - eps;
    const double lm = nll_loss(predict(spec, p64, x64), y);
    p64.mutable_weights()[i] = w0;
    const double fd = (lp - lm) / (2 * eps);
    const double an = g64.weights[i];
    const double rel = std::abs(fd - an) / std::max(1e-8, std::max(std::abs(fd), std::abs(an)));
    r.fd_max_rel_err = std::max(r.fd_max_rel_err, rel);
    ++r.coordinates;
  }
  return r;
}

RunSpec resolve(const TrainFlags& f, CLI::App& cmd, std::ostream& err) {
  if (!f.manifest.empty()) {
    for (const char* name : {"--arch", "--mode", "--q", "--epochs", "--lr", "--momentum", "--wd",
                             "--wd-mode", "--split", "--batch-size", "--seed", "--init-seed",
                             "--shuffle-seed", "--rescue-seed", "--reinit-seed", "--init-scheme",
                             "--reinit-scheme", "--max-steps", "--lr-decay-every", "--lr-decay-factor",
                             "--train-limit", "--test-limit", "--standardize", "--probe-each-epoch"}) {
      if (cmd.count(name) > 0) {
        throw UsageError(std::string(name) + " cannot be combined with --manifest");
      }
    }
    return load_manifest(f.manifest);
  }

  RunSpec run;
  run.arch = f.arch;
  NetworkSpec::by_name(run.arch);
  run.mode = parse_train_mode(f.mode);
  TrainConfig& c = run.cfg;
  if (run.mode == TrainMode::baseline) {
    if (!f.q.empty()) err << "warning: --q is ignored for mode baseline (everything is trained)\n";
    c.q = FreezeRate::zero();
  } else {
    if (f.q.empty()) throw UsageError("--q is required for mode " + f.mode);
    c.q = FreezeRate::parse(f.q);
  }
  c.epochs = f.epochs;
  c.lr = f.lr;
  c.momentum = f.momentum;
  c.weight_decay = f.wd;
  if (run.mode == TrainMode::freezenet_wd) {
    if (!f.wd_mode.empty() && parse_weight_decay_mode(f.wd_mode) != WeightDecayMode::all_weights) {
      throw UsageError("mode freezenet_wd decays every weight; --wd-mode " + f.wd_mode + " contradicts it");
    }
    c.wd_mode = WeightDecayMode::all_weights;
  } else if (!f.wd_mode.empty()) {
    c.wd_mode = parse_weight_decay_mode(f.wd_mode);
  }
  c.split = SplitRatio::parse(f.split);
  c.batch_size = f.batch_size;
  c.lr_decay_every = f.lr_decay_every;
  c.lr_decay_factor = f.lr_decay_factor;
  c.max_steps = f.max_steps;
  c.init_scheme = parse_init_scheme(f.init_scheme);
  if (!f.reinit_scheme.empty()) {
    if (run.mode == TrainMode::baseline) {
      throw UsageError("--reinit-scheme needs a mask; mode baseline has none");
    }
    c.reinit_scheme = parse_init_scheme(f.reinit_scheme);
  }
  c.probe_each_epoch = f.probe_each_epoch;
  c.seeds = f.seeds.resolve();
  run.train_limit = f.data.train_limit;
  run.test_limit = f.data.test_limit;
  run.standardize = f.data.standardize;
  c.validate();
  return run;
}

int run_train(const TrainFlags& f, CLI::App& cmd, std::ostream& out, std::ostream& err) {
  const RunSpec run = resolve(f, cmd, err);
  const NetworkSpec spec = NetworkSpec::by_name(run.arch);

  DataFlags data = f.data;
  data.train_limit = run.train_limit;
  data.test_limit = run.test_limit;
  data.standardize = run.standardize;
  const std::filesystem::path dir = data.resolve_dir();
  const MnistSet mnist = data.load();

  const std::filesystem::path out_dir = f.out_dir;
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "manifest.json", manifest_text(run, dir.string()));

  std::optional<VerifyReport> verify;
  if (f.f64_verify) {
    PreparedRun prepared = prepare_run(spec, run.cfg, mnist.train, run.mode);
    verify = verify_f64(spec, prepared.params, prepared.train_data);
    err << "f64 verify: finite-difference max rel err " << verify->fd_max_rel_err << " over "
        << verify->coordinates << " weights, f32 vs f64 max |dW| diff " << verify->f32_f64_max_abs_diff
        << "\n";
    if (verify->fd_max_rel_err > 1e-4) {
      err << "warning: finite-difference check above 1e-4 (a sampled weight may sit on a ReLU or max-pool kink)\n";
    }
  }

  TrainHooks hooks;
  const TrainResult result = train(spec, run.cfg, mnist.train, mnist.test, run.mode, hooks);
  write_file(out_dir / "history.csv", history_csv(result.history));

  const FrozenPolicy policy = choose_policy(spec, result.best_snapshot, result.mask, result.regen_scheme,
                                            result.regen_purpose, result.regen_seed);
  CheckpointMeta meta{static_cast<std::uint32_t>(result.epoch_of_best),
                      static_cast<float>(result.best_val_acc)};
  const Checkpoint ckpt = make_checkpoint(spec, result.best_snapshot, result.mask, result.regen_scheme,
                                          result.regen_purpose, result.regen_seed, policy, meta);
  const auto bytes = encode(ckpt);
  write_file(out_dir / "checkpoint.fznt", bytes);

  const RealFreezingRate qb = real_freezing_rate(result.mask, spec);
  const SizeReport size = size_report(ckpt);
  ordered_json summary;
  summary["test_acc"] = result.test_acc ? ordered_json(*result.test_acc) : ordered_json();
  summary["q"] = run.cfg.q.value();
  summary["q_beta"] = std::stod(qb.display());
  summary["q_beta_exact"] = qb.value();
  summary["epoch_of_best"] = result.epoch_of_best;
  summary["best_val_acc"] = result.best_val_acc;
  summary["steps"] = result.steps;
  summary["kept_weights"] = result.mask.popcount();
  summary["rescued"] = result.mask.rescued;
  summary["checkpoint_policy"] = std::string(to_string(policy));
  summary["trained_size_kib"] = round1(size.reported_kib);
  summary["compression_factor"] = size.compression_factor;
  summary["checkpoint_bytes"] = bytes.size();
  if (verify) {
    summary["f64_verify"] = ordered_json{{"fd_max_rel_err", verify->fd_max_rel_err},
                                         {"f32_f64_max_abs_diff", verify->f32_f64_max_abs_diff},
                                         {"coordinates", verify->coordinates}};
  }
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");

  out << "mode " << to_string(run.mode) << ", q " << run.cfg.q.to_string() << ", q_beta " << qb.display()
      << ", best epoch " << result.epoch_of_best << ", val acc " << result.best_val_acc;
  if (result.test_acc) out << ", test acc " << *result.test_acc;
  out << "\nartifacts in " << out_dir.string() << "\n";
  return exit_ok;
}

}  // namespace

void add_train(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto flags = std::make_shared<TrainFlags>();
  CLI::App* cmd = app.add_subcommand("train", "Select a mask, train, and write run artifacts");
  cmd->add_option("--manifest", flags->manifest, "Re-run exactly the configuration of a manifest.json");
  cmd->add_option("--arch", flags->arch, "lenet300100 or lenet5caffe")->capture_default_str();
  cmd->add_option("--mode", flags->mode,
                  "baseline, freezenet, freezenet_wd, snip, grasp_prune or random_freeze")
      ->capture_default_str();
  cmd->add_option("--q", flags->q, "Freezing rate in [0, 1), as a decimal");
  cmd->add_option("--epochs", flags->epochs)->capture_default_str();
  cmd->add_option("--lr", flags->lr)->capture_default_str();
  cmd->add_option("--momentum", flags->momentum)->capture_default_str();
  cmd->add_option("--wd", flags->wd, "L2 weight decay")->capture_default_str();
  cmd->add_option("--wd-mode", flags->wd_mode, "trainable_only (default) or all_weights");
  cmd->add_option("--split", flags->split, "train/val ratio")->capture_default_str();
  cmd->add_option("--batch-size", flags->batch_size)->capture_default_str();
  cmd->add_option("--lr-decay-every", flags->lr_decay_every, "Optimizer steps per LR drop")->capture_default_str();
  cmd->add_option("--lr-decay-factor", flags->lr_decay_factor)->capture_default_str();
  cmd->add_option("--max-steps", flags->max_steps, "Stop after this many steps (0 = none)");
  cmd->add_option("--seed", flags->seeds.seed, "Seed for every stream")->capture_default_str();
  cmd->add_option("--init-seed", flags->seeds.init);
  cmd->add_option("--shuffle-seed", flags->seeds.shuffle);
  cmd->add_option("--rescue-seed", flags->seeds.rescue);
  cmd->add_option("--reinit-seed", flags->seeds.reinit);
  cmd->add_option("--init-scheme", flags->init_scheme, "xavier_normal, kaiming_uniform or pm_sigma")
      ->capture_default_str();
  cmd->add_option("--reinit-scheme", flags->reinit_scheme, "Reinitialize after masking with this scheme");
  cmd->add_flag("--probe-each-epoch", flags->probe_each_epoch, "Record the gradient-flow probe per epoch");
  cmd->add_option("--data-dir", flags->data.data_dir, "MNIST IDX directory (else $FREEZENET_DATA_DIR)");
  cmd->add_option("--train-limit", flags->data.train_limit, "Use only the first N training images");
  cmd->add_option("--test-limit", flags->data.test_limit, "Use only the first N test images");
  cmd->add_flag("--standardize", flags->data.standardize, "Standardize pixels with training-set statistics");
  cmd->add_option("--out-dir", flags->out_dir, "Artifact directory")->required();
  cmd->add_flag("--f64-verify", flags->f64_verify, "Finite-difference check of the initial network in 64-bit");
  cmd->callback([flags, cmd, &out, &err] { run_train(*flags, *cmd, out, err); });
}

}  // namespace freezenet::cli
