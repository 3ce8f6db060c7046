// Acceptance runner: one PASS/FAIL line per criterion.
//   freezenet_acceptance [--only N] [--data-dir DIR]
// Exit 0 when every selected criterion passes, 1 on any failure, 77 when a
// selected criterion needs MNIST and none was found.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <unistd.h>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "freezenet/checkpoint.hpp"
#include "freezenet/cli.hpp"
#include "freezenet/probe.hpp"
#include "freezenet/train.hpp"
#include "support/oracles.hpp"

#ifndef FREEZENET_MNIST_DIR
#define FREEZENET_MNIST_DIR ""
#endif

namespace fs = std::filesystem;
using namespace freezenet;

namespace {

constexpr int kSkip = 77;

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Context {
 public:
  explicit Context(fs::path dir) : dir_(std::move(dir)) {}

  bool has_data() const {
    for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                          "t10k-labels-idx1-ubyte"}) {
      if (!fs::exists(dir_ / f)) return false;
    }
    return true;
  }
  const MnistSet& mnist() {
    if (!mnist_) mnist_ = load_mnist(dir_);
    return *mnist_;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::optional<MnistSet> mnist_;
};

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string percents(const std::vector<double>& v) {
  std::string s;
  for (double a : v) s += (s.empty() ? "" : "/") + fixed(100 * a, 2);
  return s;
}

TrainConfig seeded(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seeds = Seeds{seed, seed, seed, seed};
  return cfg;
}

// ---------------------------------------------------------------------------

Verdict c01_table2_arithmetic(Context& ctx) {
  struct Row {
    const char* q;
    const char* q_beta;
    double kib;
    double factor;
  };
  const Row table[] = {{"0.9", "0.899", 170.7, 9.9},
                       {"0.99", "0.989", 19.1, 88.2},
                       {"0.995", "0.994", 10.7, 157.4},
                       {"0.999", "0.998", 3.9, 431.8}};
  constexpr double kBaselineKib = 1683.9;
  constexpr double kTol = 0.1 + 1e-9;

  const NetworkSpec spec = NetworkSpec::lenet5caffe();
  const std::size_t n_w = spec.layout().weight_count, n_b = spec.layout().bias_count;
  Verdict v{true, ""};
  for (const Row& row : table) {
    TrainConfig cfg = seeded(1);
    cfg.q = FreezeRate::parse(row.q);
    const PreparedRun run = prepare_run(spec, cfg, ctx.mnist().train, TrainMode::freezenet);
    const Checkpoint c = make_checkpoint(spec, run.params, run.mask, run.regen_scheme, run.regen_purpose,
                                         run.regen_seed, FrozenPolicy::regenerate);
    const SizeReport s = size_report(c);
    const std::string qb = real_freezing_rate(run.mask, spec).display();

    // Independent recount: trained values are kept weights plus every bias.
    const std::size_t trained = run.mask.popcount() + n_b;
    const double kib_oracle = trained * 4.0 / 1024.0;
    const std::uint64_t frozen = n_w + n_b - trained, total = n_w + n_b;
    const std::uint64_t milli = (2000 * frozen + total) / (2 * total);  // half-up
    char qb_oracle[16];
    std::snprintf(qb_oracle, sizeof qb_oracle, "0.%03llu", static_cast<unsigned long long>(milli));
    const bool self = s.trained_values == trained && std::abs(s.reported_kib - kib_oracle) < 1e-12 &&
                      qb == qb_oracle;

    const double kib = round1(s.reported_kib);
    const bool ok = self && qb == row.q_beta && std::abs(kib - row.kib) <= kTol &&
                    std::abs(s.compression_factor - row.factor) <= kTol &&
                    std::abs(round1(s.baseline_kib) - kBaselineKib) <= kTol;
    v.pass = v.pass && ok;
    v.detail += std::string(v.detail.empty() ? "" : "; ") + "q=" + row.q + " q_b " + qb + " " + fixed(kib, 1) +
                " kB " + fixed(s.compression_factor, 1) + "x";
    if (run.mask.rescued) v.detail += " (" + std::to_string(run.mask.rescued) + " rescued)";
    if (!ok) {
      v.detail += " [want " + std::string(row.q_beta) + " " + fixed(row.kib, 1) + " kB " + fixed(row.factor, 1) +
                  "x" + (self ? "" : ", recount disagrees") + "]";
    }
  }
  return v;
}

Verdict c02_gradient_fd(Context&) {
  constexpr int kNets = 24;
  constexpr double kTol = 1e-4;
  std::mt19937_64 gen(20240601);
  int checked = 0, resampled = 0, convs = 0, pools = 0;
  double worst = 0.0;
  while (checked < kNets) {
    const NetworkSpec net = oracle::random_net(gen, 200);
    const ParamSet64 p = oracle::random_params(net, gen);
    const Tensor64 x = oracle::random_input(net, 3, gen);
    const auto y = oracle::random_labels(net, 3, gen);
    const auto fr = forward(net, p, x);
    // The widest probe moves a weight by 2h; stay clear of ReLU and max-pool kinks.
    if (oracle::kink_margin(net, fr.cache) < 2.5e-2) {
      ++resampled;
      continue;
    }
    const auto g = backward<double>(net, p, fr.cache, y);
    const auto fd = oracle::fd_gradient5(net, p, x, y, 1e-3);
    for (std::size_t i = 0; i < fd.weights.size(); ++i) worst = std::max(worst, oracle::rel_err(g.weights[i], fd.weights[i]));
    for (std::size_t i = 0; i < fd.biases.size(); ++i) worst = std::max(worst, oracle::rel_err(g.biases[i], fd.biases[i]));
    bool conv = false, pool = false;
    for (const LayerSpec& l : net.layers()) {
      conv = conv || l.kind == LayerKind::conv2d;
      pool = pool || l.kind == LayerKind::maxpool2d;
    }
    convs += conv;
    pools += pool;
    ++checked;
  }
  return {worst <= kTol, std::to_string(checked) + " nets (" + std::to_string(convs) + " conv, " +
                             std::to_string(pools) + " with max-pool, " + std::to_string(resampled) +
                             " resampled near kinks), max rel err " + sci(worst) + " <= " + sci(kTol)};
}

Verdict c03_grasp_hvp(Context&) {
  constexpr int kNets = 6;
  constexpr double kTol = 1e-5;
  std::mt19937_64 gen(77);
  int checked = 0, resampled = 0;
  double worst = 0.0;
  while (checked < kNets) {
    // Alternate a smooth softmax regression with random relu/conv nets.
    const NetworkSpec net = checked % 3 == 0
                                ? NetworkSpec("softmax", {1, 1, 4}, {LayerSpec::linear(4, 3), LayerSpec::log_softmax()}, 3)
                                : oracle::random_net(gen, 50);
    const ParamSet64 p = oracle::random_params(net, gen);
    const Tensor64 x = oracle::random_input(net, 6, gen);
    const auto y = oracle::random_labels(net, 6, gen);
    if (oracle::kink_margin(net, forward(net, p, x).cache) < 5e-2) {
      ++resampled;
      continue;
    }
    const GradientFn grad = [&](const std::vector<double>& w) {
      ParamSet64 q = p;
      std::copy(w.begin(), w.end(), q.mutable_weights().raw());
      const auto fr = forward(net, q, x);
      const auto g = backward<double>(net, q, fr.cache, y);
      return std::vector<double>(g.weights.data().begin(), g.weights.data().end());
    };
    const std::vector<double> w(p.weights().data().begin(), p.weights().data().end());
    const std::vector<double> g = grad(w);
    const std::vector<double> hv = hessian_vector_product(grad, w, g);
    const std::vector<double> h = oracle::fd_hessian(net, p, x, y, 1e-4);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double want = 0;
      for (std::size_t j = 0; j < w.size(); ++j) want += h[i * w.size() + j] * g[j];
      num += (hv[i] - want) * (hv[i] - want);
      den += want * want;
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
    ++checked;
  }
  return {worst <= kTol, std::to_string(checked) + " nets of <= 50 params (" + std::to_string(resampled) +
                             " resampled near kinks), max relative norm error " + sci(worst) + " <= " + sci(kTol)};
}

Verdict c04_zero_flow(Context&) {
  std::vector<NetworkSpec> nets{NetworkSpec::lenet300100(), NetworkSpec::lenet5caffe()};
  std::mt19937_64 gen(4);
  while (nets.size() < 8) {
    NetworkSpec n = oracle::random_net(gen, 200);
    if (n.layout().slices.size() >= 2) nets.push_back(n);
  }
  // Deeper random MLP so more than one layer sits below the zeroed one.
  nets.emplace_back("deep", FeatureShape{1, 1, 6},
                    std::vector<LayerSpec>{LayerSpec::linear(6, 5), LayerSpec::relu(), LayerSpec::linear(5, 5),
                                           LayerSpec::relu(), LayerSpec::linear(5, 4), LayerSpec::relu(),
                                           LayerSpec::linear(4, 3), LayerSpec::log_softmax()},
                    3);
  std::size_t cases = 0, violations = 0, vacuous = 0;
  for (const NetworkSpec& net : nets) {
    RngStream init(11, RngPurpose::init);
    const ParamSet base = init_params<float>(net, InitScheme::xavier_normal, init);
    const Tensor x = oracle::random_input(net, 8, gen).cast<float>();
    const auto y = oracle::random_labels(net, 8, gen);
    const auto& slices = net.layout().slices;
    {
      // Control: with nothing zeroed the first layer does receive gradient.
      const auto g = backward<float>(net, base, forward(net, base, x).cache, y);
      double s = 0;
      for (std::size_t i = 0; i < slices[0].weight_count; ++i) s += std::abs(g.weights[i]);
      if (s == 0.0) ++vacuous;
    }
    for (std::size_t k = 1; k < slices.size(); ++k) {
      ParamSet p = base;
      for (float& w : p.mutable_layer_weights(k)) w = 0.0f;
      const auto g = backward<float>(net, p, forward(net, p, x).cache, y);
      for (std::size_t i = 0; i < slices[k].weight_offset; ++i) {
        if (g.weights[i] != 0.0f) {
          ++violations;
          break;
        }
      }
      ++cases;
    }
  }
  return {violations == 0 && vacuous == 0,
          std::to_string(cases) + " (net, zeroed layer) cases over " + std::to_string(nets.size()) +
              " nets incl. both LeNets; nonzero upstream dW in " + std::to_string(violations) +
              ", vacuous controls " + std::to_string(vacuous)};
}

Verdict c05_accuracy_ordering(Context& ctx) {
  constexpr double kFreezeMin = 0.85, kSnipMax = 0.60, kGapMin = 0.25;
  const NetworkSpec spec = NetworkSpec::lenet5caffe();
  const MnistSet& m = ctx.mnist();
  std::vector<double> fz, sn;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg = seeded(seed);
    cfg.epochs = 5;
    cfg.q = FreezeRate::parse("0.999");
    fz.push_back(*train(spec, cfg, m.train, m.test, TrainMode::freezenet).test_acc);
    sn.push_back(*train(spec, cfg, m.train, m.test, TrainMode::snip).test_acc);
  }
  const double f = mean(fz), s = mean(sn);
  return {f >= kFreezeMin && s <= kSnipMax && f - s >= kGapMin,
          "LeNet-5 q=0.999, 5 epochs, seeds 1-3 mean test acc: freezenet " + fixed(100 * f, 2) + "% (" +
              percents(fz) + ") >= 85, snip " + fixed(100 * s, 2) + "% (" + percents(sn) + ") <= 60, gap " +
              fixed(100 * (f - s), 2) + " >= 25"};
}

Verdict c06_baseline_parity(Context& ctx) {
  constexpr double kBaselineMin = 0.97, kMaxGap = 0.015;
  const NetworkSpec spec = NetworkSpec::lenet300100();
  const MnistSet& m = ctx.mnist();
  TrainConfig cfg = seeded(1);
  cfg.epochs = 5;
  const double base = *train(spec, cfg, m.train, m.test, TrainMode::baseline).test_acc;
  cfg.q = FreezeRate::parse("0.9");
  const double fz = *train(spec, cfg, m.train, m.test, TrainMode::freezenet).test_acc;
  return {base >= kBaselineMin && base - fz <= kMaxGap + 1e-12,
          "LeNet-300-100, 5 epochs: baseline " + fixed(100 * base, 2) + "% >= 97, freezenet q=0.9 " +
              fixed(100 * fz, 2) + "% (gap " + fixed(100 * (base - fz), 2) + " <= 1.5)"};
}

Verdict c07_gradient_flow(Context& ctx) {
  constexpr double kMaxRatio = 0.1;
  const NetworkSpec spec = NetworkSpec::lenet5caffe();
  std::vector<double> fz, sn;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg = seeded(seed);
    cfg.q = FreezeRate::parse("0.999");
    for (TrainMode mode : {TrainMode::freezenet, TrainMode::snip}) {
      const PreparedRun run = prepare_run(spec, cfg, ctx.mnist().train, mode);
      const double g = mean_abs_gradient(spec, run.params, run.mask, run.train_data, cfg.batch_size);
      (mode == TrainMode::freezenet ? fz : sn).push_back(g);
    }
    per_seed += (per_seed.empty() ? "" : "/") + sci(sn.back() / fz.back());
  }
  const double ratio = mean(sn) / mean(fz);
  return {ratio < kMaxRatio, "LeNet-5 q=0.999 at init, seeds 1-3: mean |g| freezenet " + sci(mean(fz)) + ", snip " +
                                 sci(mean(sn)) + ", ratio " + sci(ratio) + " < 0.1 (per seed " + per_seed + ")"};
}

Verdict c08_immutability(Context& ctx) {
  constexpr std::uint64_t kSteps = 1000;
  const NetworkSpec spec = NetworkSpec::lenet300100();
  const MnistSet& m = ctx.mnist();
  std::string detail;
  bool pass = true;
  for (TrainMode mode : {TrainMode::freezenet, TrainMode::snip}) {
    TrainConfig cfg = seeded(5);
    cfg.q = FreezeRate::parse("0.99");
    cfg.epochs = 2;
    cfg.max_steps = kSteps;
    const PreparedRun before = prepare_run(spec, cfg, m.train, mode);
    const auto& w0 = before.params.weights().data();
    const auto& bits = before.mask.bits;
    std::size_t bad_steps = 0;
    TrainHooks hooks;
    hooks.after_step = [&](const OptimizerState& s) {
      const auto& w = s.params.weights().data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (bits[i]) continue;
        const bool held = prunes(mode) ? std::bit_cast<std::uint32_t>(w[i]) == 0u
                                       : std::bit_cast<std::uint32_t>(w[i]) == std::bit_cast<std::uint32_t>(w0[i]);
        if (!held) {
          ++bad_steps;
          return;
        }
      }
    };
    const TrainResult r = train(spec, cfg, m.train, {}, mode, hooks);
    const bool same_start = r.initial.bitwise_equal(before.params);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) moved += bits[i] && r.final_params.weights()[i] != w0[i];
    const bool ok = r.steps == kSteps && bad_steps == 0 && same_start && moved > 0;
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(to_string(mode)) + " " +
              std::to_string(r.steps) + " steps, " + std::to_string(bad_steps) + " steps with a " +
              (prunes(mode) ? "nonzero pruned" : "changed frozen") + " weight, " + std::to_string(moved) +
              " trainable weights moved";
  }
  return {pass, "LeNet-300-100 q=0.99: " + detail};
}

Verdict c09_wd_shrinkage(Context& ctx) {
  constexpr std::uint64_t kSteps = 2000;
  constexpr double kMaxFraction = 0.5;
  const NetworkSpec spec = NetworkSpec::lenet300100();
  TrainConfig cfg = seeded(6);
  cfg.q = FreezeRate::parse("0.99");
  cfg.momentum = 0.0;
  cfg.wd_mode = WeightDecayMode::all_weights;
  cfg.epochs = 4;
  cfg.max_steps = kSteps;
  const MnistSet& m = ctx.mnist();
  const PreparedRun before = prepare_run(spec, cfg, m.train, TrainMode::freezenet_wd);
  const auto& bits = before.mask.bits;
  auto max_frozen = [&](const ParamSet& p) {
    double mx = 0;
    const auto& w = p.weights().data();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!bits[i]) mx = std::max(mx, static_cast<double>(std::abs(w[i])));
    return mx;
  };
  const double initial = max_frozen(before.params);
  double last = initial;
  std::size_t increases = 0;
  TrainHooks hooks;
  hooks.after_step = [&](const OptimizerState& s) {
    const double now = max_frozen(s.params);
    if (now > last) ++increases;
    last = now;
  };
  const TrainResult r = train(spec, cfg, m.train, {}, TrainMode::freezenet_wd, hooks);
  const double fraction = last / initial;
  const double closed_form = std::pow(1.0 - cfg.lr * cfg.weight_decay, static_cast<double>(r.steps));
  return {r.steps == kSteps && fraction < kMaxFraction && increases == 0,
          "LeNet-300-100 freezenet_wd, momentum 0, lr " + fixed(cfg.lr, 1) + ", wd " + sci(cfg.weight_decay) +
              ", " + std::to_string(r.steps) + " steps: max frozen |W| " + fixed(initial, 4) + " -> " +
              fixed(last, 4) + " (x" + fixed(fraction, 4) + ", closed form x" + fixed(closed_form, 4) +
              ", needs < 0.5), increases " + std::to_string(increases)};
}

Verdict c10_checkpoint_roundtrip(Context&) {
  constexpr std::size_t kMaskHeader = 1 + 4;  // codec byte + length field
  std::size_t cases = 0, failures = 0, worst_slack = SIZE_MAX;
  for (const NetworkSpec& spec : {NetworkSpec::lenet300100(), NetworkSpec::lenet5caffe()}) {
    for (const char* q : {"0", "0.9", "0.99", "0.999"}) {
      RngStream init(8, RngPurpose::init), rescue(8, RngPurpose::rescue);
      ParamSet p = init_params<float>(spec, InitScheme::xavier_normal, init);
      const FreezeMask mask = build_mask(random_scores(spec, rescue), FreezeRate::parse(q), spec, rescue);
      std::mt19937_64 gen(8);
      std::normal_distribution<float> nd(0.0f, 0.01f);
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.bits[i]) p.mutable_weights()[i] += nd(gen);
      for (float& b : p.mutable_biases().data()) b = nd(gen);
      const Checkpoint c = make_checkpoint(spec, p, mask, InitScheme::xavier_normal, RngPurpose::init, 8,
                                           FrozenPolicy::regenerate, CheckpointMeta{4, 0.97f});
      const auto bytes = encode(c);
      const Checkpoint back = decode(bytes);
      const Restored r = restore(back);
      const SizeReport s = size_report(c);
      const bool ok = encode(back) == bytes && r.params.bitwise_equal(p) && r.mask.bits == mask.bits &&
                      s.encoded_mask_bytes + kMaskHeader <= s.raw_mask_bytes + kMaskHeader;
      worst_slack = std::min(worst_slack, s.raw_mask_bytes - std::min(s.raw_mask_bytes, s.encoded_mask_bytes));
      failures += !ok;
      ++cases;
    }
  }
  return {failures == 0, std::to_string(cases) + " (arch, q) cases, " + std::to_string(failures) +
                             " failed bitwise identity or mask bound; smallest raw-minus-encoded mask slack " +
                             std::to_string(worst_slack) + " B"};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Verdict c11_determinism(Context& ctx) {
  const fs::path root = fs::temp_directory_path() / ("fznt_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream out, err;
  const int first = run_cli({"train", "--arch", "lenet300100", "--mode", "freezenet", "--q", "0.9", "--epochs", "5",
                             "--seed", "3", "--data-dir", ctx.dir().string(), "--out-dir", (root / "a").string()},
                            out, err);
  const int second = run_cli({"train", "--manifest", (root / "a" / "manifest.json").string(), "--data-dir",
                              ctx.dir().string(), "--out-dir", (root / "b").string()},
                             out, err);
  Verdict v;
  if (first != exit_ok || second != exit_ok) {
    v = {false, "runs exited " + std::to_string(first) + "/" + std::to_string(second) + ": " + err.str()};
  } else {
    const std::string ca = slurp(root / "a" / "checkpoint.fznt"), cb = slurp(root / "b" / "checkpoint.fznt");
    const std::string ha = slurp(root / "a" / "history.csv"), hb = slurp(root / "b" / "history.csv");
    const bool same = !ca.empty() && ca == cb && !ha.empty() && ha == hb;
    v = {same, "LeNet-300-100 freezenet q=0.9, 5 epochs, rerun from manifest: checkpoint " +
                   std::to_string(ca.size()) + " B " + (ca == cb ? "identical" : "DIFFERS") + ", history.csv " +
                   (ha == hb ? "identical" : "DIFFERS")};
  }
  fs::remove_all(root);
  return v;
}

Verdict c12_capacity(Context& ctx) {
  const NetworkSpec spec = NetworkSpec::lenet5caffe();
  const MnistSet& m = ctx.mnist();
  TrainConfig cfg = seeded(1);
  cfg.epochs = 5;
  cfg.weight_decay = 0.0;
  cfg.q = FreezeRate::parse("0.99");
  const TrainResult fz = train(spec, cfg, m.train, {}, TrainMode::freezenet);
  const TrainResult sn = train(spec, cfg, m.train, {}, TrainMode::snip);
  const double a = fz.history.back().train_acc, b = sn.history.back().train_acc;
  return {a > b, "LeNet-5 q=0.99, wd 0, epoch-5 train acc: freezenet " + fixed(100 * a, 2) + "% > snip " +
                     fixed(100 * b, 2) + "%"};
}

struct Criterion {
  int id;
  const char* title;
  bool needs_data;
  Verdict (*run)(Context&);
};

const Criterion kCriteria[] = {
    {1, "LeNet-5 size/compression table arithmetic", true, c01_table2_arithmetic},
    {2, "backward vs central differences", false, c02_gradient_fd},
    {3, "GraSP Hessian-vector product", false, c03_grasp_hvp},
    {4, "zero-flow below a zeroed layer", false, c04_zero_flow},
    {5, "accuracy ordering at q=0.999", true, c05_accuracy_ordering},
    {6, "baseline parity at q=0.9", true, c06_baseline_parity},
    {7, "gradient-flow probe at init", true, c07_gradient_flow},
    {8, "frozen immutability and prune nullity", true, c08_immutability},
    {9, "FreezeNet-WD shrinkage", true, c09_wd_shrinkage},
    {10, "checkpoint roundtrip", false, c10_checkpoint_roundtrip},
    {11, "determinism from manifest", true, c11_determinism},
    {12, "capacity without weight decay", true, c12_capacity},
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Activation buffers are reallocated every batch; keep them off mmap so pages stay faulted in.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Acceptance criteria runner", "freezenet_acceptance"};
  int only = 0;
  std::string data_dir;
  app.add_option("--only", only, "Run a single criterion (1-12)")->check(CLI::Range(1, 12));
  app.add_option("--data-dir", data_dir, "MNIST IDX directory");
  CLI11_PARSE(app, argc, argv);
  if (data_dir.empty()) {
    if (auto env = data_dir_from_env()) {
      data_dir = env->string();
    } else {
      data_dir = FREEZENET_MNIST_DIR;
    }
  }

  Context ctx{fs::path(data_dir)};
  int failures = 0, skipped = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    char tag[8];
    std::snprintf(tag, sizeof tag, "C%02d", c.id);
    if (c.needs_data && !ctx.has_data()) {
      std::cout << tag << " SKIP " << c.title << " | no MNIST files in '" << data_dir << "'" << std::endl;
      ++skipped;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << tag << (v.pass ? " PASS " : " FAIL ") << c.title << " (" << fixed(secs, 1) << " s) | " << v.detail
              << std::endl;
    failures += !v.pass;
  }
  if (failures) return 1;
  return skipped ? kSkip : 0;
}
