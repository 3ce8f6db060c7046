#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "freezenet/errors.hpp"

namespace freezenet {

enum class LayerKind : std::uint8_t { linear, conv2d, relu, maxpool2d, flatten, log_softmax };

std::string_view to_string(LayerKind kind);

struct FeatureShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // linear: features in/out; conv2d: channels in/out.
  std::size_t in = 0;
  std::size_t out = 0;
  // conv2d and maxpool2d geometry (square windows).
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec linear(std::size_t n_in, std::size_t n_out);
  static LayerSpec conv2d(std::size_t c_in, std::size_t c_out, std::size_t kernel = 5,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec relu();
  static LayerSpec maxpool2d(std::size_t kernel = 2, std::size_t stride = 2);
  static LayerSpec flatten();
  static LayerSpec log_softmax();

  bool has_params() const noexcept {
    return kind == LayerKind::linear || kind == LayerKind::conv2d;
  }
  bool operator==(const LayerSpec&) const = default;
};

// Where one parametrized layer lives inside the flat weight and bias stores.
struct ParamSlice {
  std::size_t layer = 0;  // index into NetworkSpec::layers()
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

struct ParamLayout {
  std::vector<ParamSlice> slices;
  std::size_t weight_count = 0;
  std::size_t bias_count = 0;

  std::size_t total() const noexcept { return weight_count + bias_count; }
  // Index of the slice owning flat weight `index`.
  std::size_t slice_of_weight(std::size_t index) const;
};

class NetworkSpec {
 public:
  // Validates that layer shapes compose and that the head is a log-softmax
  // over `class_count` outputs.
  NetworkSpec(std::string name, FeatureShape input, std::vector<LayerSpec> layers,
              std::size_t class_count);

  static NetworkSpec lenet300100();
  static NetworkSpec lenet5caffe();
  // "lenet300100" or "lenet5caffe".
  static NetworkSpec by_name(std::string_view name);

  // Versioned text form embedded in checkpoints:
  //   fznt-arch 1
  //   name lenet5caffe
  //   input 1 28 28
  //   classes 10
  //   layer conv2d 1 20 5 1 0
  //   ...
  std::string descriptor() const;
  static NetworkSpec from_descriptor(std::string_view text);

  const std::string& name() const noexcept { return name_; }
  const FeatureShape& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t class_count() const noexcept { return class_count_; }
  // Output shape of every layer, in order.
  const std::vector<FeatureShape>& output_shapes() const noexcept { return outputs_; }
  FeatureShape input_shape_of(std::size_t layer) const;
  const ParamLayout& layout() const noexcept { return layout_; }

  bool operator==(const NetworkSpec& other) const;

 private:
  std::string name_;
  FeatureShape input_;
  std::vector<LayerSpec> layers_;
  std::size_t class_count_;
  std::vector<FeatureShape> outputs_;
  ParamLayout layout_;
};

}  // namespace freezenet
