#include "freezenet/network.hpp"

#include <algorithm>
#include <sstream>

namespace freezenet {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::log_softmax: return "log_softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::linear(std::size_t n_in, std::size_t n_out) {
  return LayerSpec{LayerKind::linear, n_in, n_out, 0, 1, 0};
}

LayerSpec LayerSpec::conv2d(std::size_t c_in, std::size_t c_out, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  return LayerSpec{LayerKind::conv2d, c_in, c_out, kernel, stride, padding};
}

LayerSpec LayerSpec::relu() { return LayerSpec{LayerKind::relu}; }

LayerSpec LayerSpec::maxpool2d(std::size_t kernel, std::size_t stride) {
  return LayerSpec{LayerKind::maxpool2d, 0, 0, kernel, stride, 0};
}

LayerSpec LayerSpec::flatten() { return LayerSpec{LayerKind::flatten}; }

LayerSpec LayerSpec::log_softmax() { return LayerSpec{LayerKind::log_softmax}; }

std::size_t ParamLayout::slice_of_weight(std::size_t index) const {
  auto it = std::upper_bound(slices.begin(), slices.end(), index,
                             [](std::size_t i, const ParamSlice& s) { return i < s.weight_offset; });
  if (it == slices.begin() || index >= weight_count) {
    throw DimensionError("weight index " + std::to_string(index) + " outside layout");
  }
  return static_cast<std::size_t>(std::distance(slices.begin(), it)) - 1;
}

namespace {

std::string describe(std::size_t layer, const LayerSpec& spec) {
  return "layer " + std::to_string(layer) + " (" + std::string(to_string(spec.kind)) + ")";
}

}  // namespace

NetworkSpec::NetworkSpec(std::string name, FeatureShape input, std::vector<LayerSpec> layers,
                         std::size_t class_count)
    : name_(std::move(name)), input_(input), layers_(std::move(layers)), class_count_(class_count) {
  if (input_.size() == 0) throw DimensionError("network input must be non-empty");
  if (layers_.empty()) throw DimensionError("network has no layers");

  FeatureShape shape = input_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::linear:
        if (l.in == 0 || l.out == 0) throw DimensionError(describe(i, l) + ": zero width");
        if (shape.size() != l.in) {
          throw DimensionError(describe(i, l) + ": expects " + std::to_string(l.in) +
                               " inputs, receives " + std::to_string(shape.size()));
        }
        shape = FeatureShape{l.out, 1, 1};
        break;
      case LayerKind::conv2d: {
        if (l.in == 0 || l.out == 0 || l.kernel == 0 || l.stride == 0) {
          throw DimensionError(describe(i, l) + ": degenerate geometry");
        }
        if (shape.channels != l.in) {
          throw DimensionError(describe(i, l) + ": expects " + std::to_string(l.in) +
                               " channels, receives " + std::to_string(shape.channels));
        }
        const std::size_t h = shape.height + 2 * l.padding;
        const std::size_t w = shape.width + 2 * l.padding;
        if (h < l.kernel || w < l.kernel) throw DimensionError(describe(i, l) + ": kernel exceeds input");
        shape = FeatureShape{l.out, (h - l.kernel) / l.stride + 1, (w - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::maxpool2d:
        if (l.kernel == 0 || l.stride == 0) throw DimensionError(describe(i, l) + ": degenerate window");
        if (shape.height < l.kernel || shape.width < l.kernel) {
          throw DimensionError(describe(i, l) + ": window exceeds input");
        }
        shape = FeatureShape{shape.channels, (shape.height - l.kernel) / l.stride + 1,
                             (shape.width - l.kernel) / l.stride + 1};
        break;
      case LayerKind::flatten:
        shape = FeatureShape{shape.size(), 1, 1};
        break;
      case LayerKind::relu:
        break;
      case LayerKind::log_softmax:
        if (i + 1 != layers_.size()) throw DimensionError("log_softmax must be the last layer");
        shape = FeatureShape{shape.size(), 1, 1};
        break;
    }
    outputs_.push_back(shape);

    if (l.has_params()) {
      ParamSlice s;
      s.layer = i;
      s.weight_offset = layout_.weight_count;
      s.bias_offset = layout_.bias_count;
      if (l.kind == LayerKind::linear) {
        s.weight_count = l.in * l.out;
        s.fan_in = l.in;
        s.fan_out = l.out;
      } else {
        const std::size_t window = l.kernel * l.kernel;
        s.weight_count = l.out * l.in * window;
        s.fan_in = l.in * window;
        s.fan_out = l.out * window;
      }
      s.bias_count = l.out;
      layout_.weight_count += s.weight_count;
      layout_.bias_count += s.bias_count;
      layout_.slices.push_back(s);
    }
  }
  if (layers_.back().kind != LayerKind::log_softmax) {
    throw DimensionError("network must end in log_softmax");
  }
  if (shape.size() != class_count_) {
    throw DimensionError("network emits " + std::to_string(shape.size()) + " outputs for " +
                         std::to_string(class_count_) + " classes");
  }
}

NetworkSpec NetworkSpec::lenet300100() {
  return NetworkSpec("lenet300100", FeatureShape{1, 28, 28},
                     {LayerSpec::flatten(), LayerSpec::linear(784, 300), LayerSpec::relu(),
                      LayerSpec::linear(300, 100), LayerSpec::relu(), LayerSpec::linear(100, 10),
                      LayerSpec::log_softmax()},
                     10);
}

NetworkSpec NetworkSpec::lenet5caffe() {
  return NetworkSpec("lenet5caffe", FeatureShape{1, 28, 28},
                     {LayerSpec::conv2d(1, 20), LayerSpec::relu(), LayerSpec::maxpool2d(),
                      LayerSpec::conv2d(20, 50), LayerSpec::relu(), LayerSpec::maxpool2d(),
                      LayerSpec::flatten(), LayerSpec::linear(800, 500), LayerSpec::relu(),
                      LayerSpec::linear(500, 10), LayerSpec::log_softmax()},
                     10);
}

NetworkSpec NetworkSpec::by_name(std::string_view name) {
  if (name == "lenet300100") return lenet300100();
  if (name == "lenet5caffe") return lenet5caffe();
  throw ParameterError("unknown architecture '" + std::string(name) +
                       "' (expected lenet300100 or lenet5caffe)");
}

FeatureShape NetworkSpec::input_shape_of(std::size_t layer) const {
  if (layer >= layers_.size()) throw DimensionError("layer index out of range");
  return layer == 0 ? input_ : outputs_[layer - 1];
}

std::string NetworkSpec::descriptor() const {
  std::ostringstream os;
  os << "fznt-arch 1\n";
  os << "name " << name_ << '\n';
  os << "input " << input_.channels << ' ' << input_.height << ' ' << input_.width << '\n';
  os << "classes " << class_count_ << '\n';
  for (const LayerSpec& l : layers_) {
    os << "layer " << to_string(l.kind);
    switch (l.kind) {
      case LayerKind::linear: os << ' ' << l.in << ' ' << l.out; break;
      case LayerKind::conv2d:
        os << ' ' << l.in << ' ' << l.out << ' ' << l.kernel << ' ' << l.stride << ' ' << l.padding;
        break;
      case LayerKind::maxpool2d: os << ' ' << l.kernel << ' ' << l.stride; break;
      default: break;
    }
    os << '\n';
  }
  return os.str();
}

NetworkSpec NetworkSpec::from_descriptor(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "fznt-arch") {
    throw DimensionError("architecture descriptor: missing 'fznt-arch' header");
  }
  if (version != 1) {
    throw DimensionError("architecture descriptor: unsupported version " + std::to_string(version));
  }
  std::string name;
  FeatureShape input;
  std::size_t classes = 0;
  std::vector<LayerSpec> layers;
  while (in >> word) {
    if (word == "name") {
      in >> name;
    } else if (word == "input") {
      in >> input.channels >> input.height >> input.width;
    } else if (word == "classes") {
      in >> classes;
    } else if (word == "layer") {
      std::string kind;
      in >> kind;
      if (kind == "linear") {
        std::size_t a = 0, b = 0;
        in >> a >> b;
        layers.push_back(LayerSpec::linear(a, b));
      } else if (kind == "conv2d") {
        std::size_t a = 0, b = 0, k = 0, s = 0, p = 0;
        in >> a >> b >> k >> s >> p;
        layers.push_back(LayerSpec::conv2d(a, b, k, s, p));
      } else if (kind == "maxpool2d") {
        std::size_t k = 0, s = 0;
        in >> k >> s;
        layers.push_back(LayerSpec::maxpool2d(k, s));
      } else if (kind == "relu") {
        layers.push_back(LayerSpec::relu());
      } else if (kind == "flatten") {
        layers.push_back(LayerSpec::flatten());
      } else if (kind == "log_softmax") {
        layers.push_back(LayerSpec::log_softmax());
      } else {
        throw DimensionError("architecture descriptor: unknown layer kind '" + kind + "'");
      }
    } else {
      throw DimensionError("architecture descriptor: unknown field '" + word + "'");
    }
    if (in.fail()) throw DimensionError("architecture descriptor: malformed '" + word + "' line");
  }
  return NetworkSpec(std::move(name), input, std::move(layers), classes);
}

bool NetworkSpec::operator==(const NetworkSpec& other) const {
  return name_ == other.name_ && input_ == other.input_ && layers_ == other.layers_ &&
         class_count_ == other.class_count_;
}

}  // namespace freezenet
