#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "freezenet/optim.hpp"
#include "freezenet/cli.hpp"
#include "freezenet/train.hpp"

namespace freezenet::cli {

// Per-purpose seed overrides on top of --seed.
struct SeedFlags {
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> init, shuffle, rescue, reinit;
  Seeds resolve() const;
};

// Shared --data-dir / --train-limit / --test-limit handling.
struct DataFlags {
  std::string data_dir;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  bool standardize = false;

  std::filesystem::path resolve_dir() const;  // flag, then $FREEZENET_DATA_DIR
  MnistSet load() const;
};

// A fully resolved run: what the manifest records and what reproduces it.
struct RunSpec {
  std::string arch = "lenet5caffe";
  TrainMode mode = TrainMode::freezenet;
  TrainConfig cfg;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  bool standardize = false;
};

nlohmann::ordered_json run_to_json(const RunSpec& run);
RunSpec run_from_json(const nlohmann::json& j);
// Git blob hash: SHA-1 of "blob <len>\0" followed by the compact JSON.
std::string content_hash(const std::string& text);
std::string manifest_text(const RunSpec& run, const std::string& data_dir);
RunSpec load_manifest(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const std::string& text);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

void add_train(CLI::App& app, std::ostream& out, std::ostream& err);
void add_probe(CLI::App& app, std::ostream& out, std::ostream& err);
void add_codec(CLI::App& app, std::ostream& out, std::ostream& err);

}  // namespace freezenet::cli
