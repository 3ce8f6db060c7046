#include "freezenet/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

namespace freezenet {

std::string_view to_string(DataRole role) {
  switch (role) {
    case DataRole::train: return "train";
    case DataRole::val: return "val";
    case DataRole::test: return "test";
  }
  return "unknown";
}

std::size_t Dataset::sample_size() const {
  return labels.empty() ? 0 : images.size() / labels.size();
}

Dataset Dataset::subset(std::span<const std::size_t> indices, DataRole new_role) const {
  Dataset out;
  out.role = new_role;
  gather(indices, out.images, out.labels);
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) {
    Dataset copy = *this;
    return copy;
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return subset(idx, role);
}

void Dataset::gather(std::span<const std::size_t> indices, Tensor& x,
                     std::vector<std::int32_t>& y) const {
  const std::size_t per = sample_size();
  Shape shape = images.shape();
  if (shape.empty()) shape = {0};
  shape[0] = indices.size();
  if (x.shape() != shape) x = Tensor(shape);
  y.resize(indices.size());
  const float* src = images.raw();
  float* dst = x.raw();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    if (i >= size()) throw DataError("example index " + std::to_string(i) + " out of range");
    std::copy(src + i * per, src + (i + 1) * per, dst + b * per);
    y[b] = labels[i];
  }
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 DataRole role) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  const std::string in = images_path.string();
  const std::string ln = labels_path.string();

  if (img.size() < 16) throw DataError(in + ": truncated IDX header");
  if (be32(img, 0) != 0x00000803) throw DataError(in + ": bad magic (expected 00 00 08 03)");
  if (lab.size() < 8) throw DataError(ln + ": truncated IDX header");
  if (be32(lab, 0) != 0x00000801) throw DataError(ln + ": bad magic (expected 00 00 08 01)");

  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (n != n_labels) {
    throw DataError(in + " holds " + std::to_string(n) + " images but " + ln + " holds " +
                    std::to_string(n_labels) + " labels");
  }
  if (rows == 0 || cols == 0) throw DataError(in + ": zero image dimension");
  const std::size_t pixels = n * rows * cols;
  if (img.size() - 16 < pixels) throw DataError(in + ": truncated pixel data");
  if (lab.size() - 8 < n) throw DataError(ln + ": truncated label data");

  Dataset out;
  out.role = role;
  out.images = Tensor(Shape{n, 1, rows, cols});
  float* dst = out.images.raw();
  for (std::size_t i = 0; i < pixels; ++i) dst[i] = static_cast<float>(img[16 + i]) / 255.0f;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = lab[8 + i];
    if (v > 9) throw DataError(ln + ": label " + std::to_string(v) + " at index " + std::to_string(i) + " outside 0..9");
    out.labels[i] = static_cast<std::int32_t>(v);
  }
  return out;
}

MnistSet load_mnist(const std::filesystem::path& dir) {
  MnistSet set;
  set.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", DataRole::train);
  set.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", DataRole::test);
  return set;
}

std::optional<std::filesystem::path> data_dir_from_env() {
  const char* v = std::getenv("FREEZENET_DATA_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::filesystem::path(v);
}

SplitRatio SplitRatio::parse(std::string_view text) {
  const auto slash = text.find('/');
  auto number = [&](std::string_view s) -> std::uint32_t {
    if (s.empty() || s.size() > 9) throw ParameterError("split '" + std::string(text) + "': expected a/b");
    std::uint32_t v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw ParameterError("split '" + std::string(text) + "': expected a/b");
      v = v * 10 + static_cast<std::uint32_t>(c - '0');
    }
    return v;
  };
  if (slash == std::string_view::npos) throw ParameterError("split '" + std::string(text) + "': expected a/b");
  SplitRatio r{number(text.substr(0, slash)), number(text.substr(slash + 1))};
  if (r.train == 0 || r.val == 0) throw ParameterError("split '" + std::string(text) + "': both sides must be positive");
  return r;
}

std::string SplitRatio::to_string() const {
  return std::to_string(train) + "/" + std::to_string(val);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& stream) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = stream.uniform_below(i + 1);
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

std::pair<Dataset, Dataset> split_shuffle(const Dataset& train, SplitRatio ratio, RngStream& stream) {
  if (ratio.train == 0 || ratio.val == 0) throw ParameterError("split ratio sides must be positive");
  const std::size_t n = train.size();
  const auto n_train = static_cast<std::size_t>(static_cast<unsigned __int128>(n) * ratio.train /
                                                (std::uint64_t{ratio.train} + ratio.val));
  if (n_train == 0 || n_train == n) {
    throw ParameterError("split " + ratio.to_string() + " of " + std::to_string(n) +
                         " examples leaves one side empty");
  }
  const auto idx = shuffled_indices(n, stream);
  std::span<const std::size_t> all(idx);
  return {train.subset(all.first(n_train), DataRole::train),
          train.subset(all.subspan(n_train), DataRole::val)};
}

void standardize(Dataset& data, const Dataset& reference) {
  const auto ref = reference.images.data();
  if (ref.empty()) throw DataError("standardize: empty reference set");
  double sum = 0.0;
  for (float v : ref) sum += v;
  const double mean = sum / static_cast<double>(ref.size());
  double sq = 0.0;
  for (float v : ref) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(ref.size()));
  if (!(sd > 0.0)) throw DataError("standardize: reference set has zero variance");
  for (float& v : data.images.data()) v = static_cast<float>((v - mean) / sd);
}

}  // namespace freezenet
