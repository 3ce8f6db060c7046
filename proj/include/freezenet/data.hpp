#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freezenet/rng.hpp"
#include "freezenet/tensor.hpp"

namespace freezenet {

enum class DataRole : std::uint8_t { train, val, test };

std::string_view to_string(DataRole role);

struct Dataset {
  Tensor images;                    // [N x 1 x 28 x 28], pixels / 255
  std::vector<std::int32_t> labels;  // N classes in 0..9
  DataRole role = DataRole::train;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t sample_size() const;

  // Copies the listed examples, in order.
  Dataset subset(std::span<const std::size_t> indices, DataRole new_role) const;
  // The first n examples (all of them when n is 0 or exceeds the size).
  Dataset head(std::size_t n) const;
  // Gathers a batch into caller-owned buffers, reshaping them as needed.
  void gather(std::span<const std::size_t> indices, Tensor& x, std::vector<std::int32_t>& y) const;
};

// Reads a big-endian IDX image file (magic 0x00000803) and label file
// (magic 0x00000801). Throws DataError on bad magic, count or shape
// mismatch, truncation, or labels outside 0..9.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 DataRole role = DataRole::train);

struct MnistSet {
  Dataset train;
  Dataset test;
};

// Loads train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte
// and t10k-labels-idx1-ubyte from `dir`.
MnistSet load_mnist(const std::filesystem::path& dir);

// $FREEZENET_DATA_DIR when set and non-empty.
std::optional<std::filesystem::path> data_dir_from_env();

// train:val ratio such as 9/1 or 19/1.
struct SplitRatio {
  std::uint32_t train = 9;
  std::uint32_t val = 1;

  static SplitRatio parse(std::string_view text);  // "9/1"
  std::string to_string() const;
  bool operator==(const SplitRatio&) const = default;
};

// Fisher-Yates permutation of 0..n-1: for i = n-1 down to 1, swap i with
// uniform_below(i + 1).
std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& stream);

// Shuffles with `stream`, then the first floor(n * train / (train + val))
// examples form the training side and the rest validation. Throws
// ParameterError when either side would be empty.
std::pair<Dataset, Dataset> split_shuffle(const Dataset& train, SplitRatio ratio, RngStream& stream);

// Global standardization (x - mean) / std with scalar statistics from
// `reference`. Off by default; pixels stay in [0, 1].
void standardize(Dataset& data, const Dataset& reference);

}  // namespace freezenet
