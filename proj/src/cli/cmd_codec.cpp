#include <cstdio>
#include <memory>
#include <ostream>

#include "commands.hpp"
#include "freezenet/checkpoint.hpp"

namespace freezenet::cli {

namespace {

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

void print_report(const Checkpoint& c, std::ostream& out) {
  const SizeReport s = size_report(c);
  const RealFreezingRate qb = real_freezing_rate(c.mask, c.spec);
  MaskCodec codec = MaskCodec::raw_bitset;
  encode_mask(c.mask, codec);
  out << "architecture    " << c.spec.name() << '\n'
      << "q               " << c.q.to_string() << '\n'
      << "q_beta          " << qb.display() << '\n'
      << "kept weights    " << c.mask.popcount() << " of " << c.mask.size() << " (" << c.mask.rescued
      << " rescued)\n"
      << "frozen policy   " << to_string(c.policy) << '\n'
      << "init            " << to_string(c.scheme) << " from " << to_string(c.purpose) << " seed " << c.seed
      << '\n'
      << "mask codec      " << to_string(codec) << ", " << s.encoded_mask_bytes << " B (raw bitset "
      << s.raw_mask_bytes << " B)\n"
      << "trained size    " << fixed(s.reported_kib, 1) << " kB (" << s.trained_values
      << " trained values x 4 B / 1024)\n"
      << "baseline size   " << fixed(s.baseline_kib, 1) << " kB\n"
      << "compression     " << fixed(s.compression_factor, 1) << "x (unrounded " << fixed(s.exact_factor, 2)
      << "x)\n"
      << "on-disk size    " << s.on_disk_bytes << " B\n";
}

void recode(const std::string& in, const std::string& out_path, const std::string& policy_text,
            std::ostream& out) {
  const Checkpoint src = decode(read_bytes(in));
  const Restored r = restore(src);
  FrozenPolicy policy;
  if (policy_text == "auto") {
    policy = choose_policy(r.spec, r.params, r.mask, src.scheme, src.purpose, src.seed);
  } else {
    policy = parse_frozen_policy(policy_text);
  }
  FreezeMask mask = r.mask;
  mask.q = src.q;
  const Checkpoint dst = make_checkpoint(r.spec, r.params, mask, src.scheme, src.purpose, src.seed, policy, r.meta);
  write_file(out_path, encode(dst));
  print_report(dst, out);
}

}  // namespace

void add_codec(CLI::App& app, std::ostream& out, std::ostream&) {
  struct Paths {
    std::string in, out, policy = "auto";
  };
  auto compress = std::make_shared<Paths>();
  CLI::App* c = app.add_subcommand("compress", "Re-encode a checkpoint in its most compact form");
  c->add_option("input", compress->in)->required();
  c->add_option("output", compress->out)->required();
  c->add_option("--policy", compress->policy, "auto, regenerate, zero or stored")->capture_default_str();
  c->callback([compress, &out] { recode(compress->in, compress->out, compress->policy, out); });

  auto expand = std::make_shared<Paths>();
  CLI::App* d = app.add_subcommand("decompress", "Rebuild every weight and store them all explicitly");
  d->add_option("input", expand->in)->required();
  d->add_option("output", expand->out)->required();
  d->callback([expand, &out] { recode(expand->in, expand->out, "stored", out); });

  auto info = std::make_shared<Paths>();
  CLI::App* i = app.add_subcommand("info", "Verify a checkpoint and print its size report");
  i->add_option("input", info->in)->required();
  i->callback([info, &out] {
    const Checkpoint c = decode(read_bytes(info->in));
    restore(c);
    print_report(c, out);
  });
}

}  // namespace freezenet::cli
