#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "commands.hpp"
#include "freezenet/probe.hpp"

namespace freezenet::cli {

namespace {

struct ProbeFlags {
  std::string arch = "lenet5caffe";
  std::vector<std::string> methods{"freezenet", "snip"};
  std::vector<std::string> rates{"0.999"};
  std::size_t seeds = 3;
  std::uint64_t first_seed = 1;
  std::size_t batch_size = 100;
  std::string split = "9/1";
  std::string init_scheme = "xavier_normal";
  DataFlags data;
  std::string out;
};

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

int run_probe(const ProbeFlags& f, std::ostream& out, std::ostream& err) {
  const NetworkSpec spec = NetworkSpec::by_name(f.arch);
  if (f.seeds == 0) throw UsageError("--seeds must be at least 1");
  std::vector<TrainMode> modes;
  for (const std::string& m : f.methods) modes.push_back(parse_train_mode(m));
  std::vector<FreezeRate> rates;
  for (const std::string& q : f.rates) rates.push_back(FreezeRate::parse(q));

  TrainConfig base;
  base.batch_size = f.batch_size;
  base.split = SplitRatio::parse(f.split);
  base.init_scheme = parse_init_scheme(f.init_scheme);
  base.validate();
  const MnistSet mnist = f.data.load();

  std::ostringstream csv;
  csv << "method,q,q_beta,seed,mean_abs_grad,baseline,ratio\n";
  for (std::size_t s = 0; s < f.seeds; ++s) {
    const std::uint64_t seed = f.first_seed + s;
    TrainConfig cfg = base;
    cfg.seeds = Seeds{seed, seed, seed, seed};
    // The dense reference depends only on the seed: same split, same init.
    PreparedRun dense_run = prepare_run(spec, cfg, mnist.train, TrainMode::baseline);
    const double reference =
        mean_abs_gradient(spec, dense_run.params, dense_run.mask, dense_run.train_data, f.batch_size);
    auto row = [&](TrainMode mode, const FreezeRate& q, const FreezeMask& mask, double value) {
      const double ratio = reference > 0.0 ? value / reference : 0.0;
      csv << to_string(mode) << ',' << q.to_string() << ',' << real_freezing_rate(mask, spec).display()
          << ',' << seed << ',' << number(value) << ',' << number(reference) << ',' << number(ratio) << '\n';
    };
    for (TrainMode mode : modes) {
      if (mode == TrainMode::baseline) {
        row(mode, FreezeRate::zero(), dense_run.mask, reference);
        continue;
      }
      for (const FreezeRate& q : rates) {
        cfg.q = q;
        PreparedRun run = prepare_run(spec, cfg, mnist.train, mode);
        const double value = mean_abs_gradient(spec, run.params, run.mask, run.train_data, f.batch_size);
        row(mode, q, run.mask, value);
        err << to_string(mode) << " q=" << q.to_string() << " seed=" << seed << " done\n";
      }
    }
  }
  if (f.out.empty()) {
    out << csv.str();
  } else {
    write_file(f.out, csv.str());
  }
  return exit_ok;
}

}  // namespace

void add_probe(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto flags = std::make_shared<ProbeFlags>();
  CLI::App* cmd = app.add_subcommand("probe", "Gradient-flow probe at initialization, relative to dense");
  cmd->add_option("--arch", flags->arch)->capture_default_str();
  cmd->add_option("--methods", flags->methods, "Comma-separated modes (baseline adds the reference row)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--q", flags->rates, "Comma-separated freezing rates")->delimiter(',')->capture_default_str();
  cmd->add_option("--seeds", flags->seeds, "Number of seeds")->capture_default_str();
  cmd->add_option("--seed", flags->first_seed, "First seed")->capture_default_str();
  cmd->add_option("--batch-size", flags->batch_size)->capture_default_str();
  cmd->add_option("--split", flags->split)->capture_default_str();
  cmd->add_option("--init-scheme", flags->init_scheme)->capture_default_str();
  cmd->add_option("--data-dir", flags->data.data_dir);
  cmd->add_option("--train-limit", flags->data.train_limit);
  cmd->add_option("--out", flags->out, "CSV path (default: stdout)");
  cmd->callback([flags, &out, &err] { run_probe(*flags, out, err); });
}

}  // namespace freezenet::cli
