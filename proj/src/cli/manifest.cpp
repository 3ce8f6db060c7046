#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "commands.hpp"

namespace freezenet::cli {

using nlohmann::json;
using nlohmann::ordered_json;

Seeds SeedFlags::resolve() const {
  Seeds s;
  s.init = init.value_or(seed);
  s.shuffle = shuffle.value_or(seed);
  s.rescue = rescue.value_or(seed);
  s.reinit = reinit.value_or(seed);
  return s;
}

std::filesystem::path DataFlags::resolve_dir() const {
  if (!data_dir.empty()) return data_dir;
  if (auto env = data_dir_from_env()) return *env;
  throw UsageError("no MNIST directory: pass --data-dir or set FREEZENET_DATA_DIR");
}

MnistSet DataFlags::load() const {
  MnistSet set = load_mnist(resolve_dir());
  set.train = set.train.head(train_limit);
  set.test = set.test.head(test_limit);
  if (standardize) {
    const Dataset reference = set.train;
    freezenet::standardize(set.train, reference);
    freezenet::standardize(set.test, reference);
  }
  return set;
}

ordered_json run_to_json(const RunSpec& run) {
  const TrainConfig& c = run.cfg;
  ordered_json j;
  j["arch"] = run.arch;
  j["mode"] = std::string(to_string(run.mode));
  j["q"] = c.q.to_string();
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["wd_mode"] = std::string(to_string(c.wd_mode));
  j["batch_size"] = c.batch_size;
  j["lr_decay_every"] = c.lr_decay_every;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["split"] = c.split.to_string();
  j["init_scheme"] = std::string(to_string(c.init_scheme));
  j["reinit_scheme"] = c.reinit_scheme ? ordered_json(std::string(to_string(*c.reinit_scheme))) : ordered_json();
  j["max_steps"] = c.max_steps;
  j["probe_each_epoch"] = c.probe_each_epoch;
  j["train_limit"] = run.train_limit;
  j["test_limit"] = run.test_limit;
  j["standardize"] = run.standardize;
  j["seeds"] = ordered_json{{"init", c.seeds.init},
                            {"shuffle", c.seeds.shuffle},
                            {"rescue", c.seeds.rescue},
                            {"reinit", c.seeds.reinit}};
  return j;
}

RunSpec run_from_json(const json& j) {
  try {
    RunSpec run;
    TrainConfig& c = run.cfg;
    run.arch = j.at("arch").get<std::string>();
    run.mode = parse_train_mode(j.at("mode").get<std::string>());
    c.q = FreezeRate::parse(j.at("q").get<std::string>());
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.wd_mode = parse_weight_decay_mode(j.at("wd_mode").get<std::string>());
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.lr_decay_every = j.at("lr_decay_every").get<std::uint64_t>();
    c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
    c.split = SplitRatio::parse(j.at("split").get<std::string>());
    c.init_scheme = parse_init_scheme(j.at("init_scheme").get<std::string>());
    if (!j.at("reinit_scheme").is_null()) {
      c.reinit_scheme = parse_init_scheme(j.at("reinit_scheme").get<std::string>());
    }
    c.max_steps = j.at("max_steps").get<std::size_t>();
    c.probe_each_epoch = j.at("probe_each_epoch").get<bool>();
    run.train_limit = j.at("train_limit").get<std::size_t>();
    run.test_limit = j.at("test_limit").get<std::size_t>();
    run.standardize = j.at("standardize").get<bool>();
    const json& s = j.at("seeds");
    c.seeds = Seeds{s.at("init").get<std::uint64_t>(), s.at("shuffle").get<std::uint64_t>(),
                    s.at("rescue").get<std::uint64_t>(), s.at("reinit").get<std::uint64_t>()};
    return run;
  } catch (const json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
}

std::string content_hash(const std::string& text) {
  const std::string blob = "blob " + std::to_string(text.size()) + '\0' + text;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

std::string manifest_text(const RunSpec& run, const std::string& data_dir) {
  const ordered_json run_json = run_to_json(run);
  ordered_json m;
  m["format"] = "freezenet-manifest 1";
  m["config_hash"] = content_hash(run_json.dump());
  m["run"] = run_json;
  m["data_dir"] = data_dir;
  m["outputs"] = ordered_json{{"manifest", "manifest.json"},
                              {"history", "history.csv"},
                              {"checkpoint", "checkpoint.fznt"},
                              {"summary", "summary.json"}};
  return m.dump(2) + "\n";
}

RunSpec load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open manifest " + path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("manifest " + path.string() + ": " + e.what());
  }
  if (!m.contains("run")) throw UsageError("manifest " + path.string() + " has no 'run' section");
  RunSpec run = run_from_json(m["run"]);
  if (m.contains("config_hash")) {
    const std::string expected = m["config_hash"].get<std::string>();
    if (content_hash(run_to_json(run).dump()) != expected) {
      throw UsageError("manifest " + path.string() + ": config_hash does not match the run section");
    }
  }
  return run;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("cannot write " + path.string());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace freezenet::cli
