#include "freezenet/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace freezenet {

namespace {

// Layer kept fraction below which masked weight gradients are computed entry
// by entry instead of densely.
constexpr double kSparseGradientFraction = 0.125;

template <typename T>
void im2col(const T* image, const FeatureShape& in, const LayerSpec& l, const FeatureShape& out,
            T* col) {
  const std::size_t k = l.kernel;
  const std::size_t positions = out.height * out.width;
  const auto pad = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        T* row = col + ((c * k + kh) * k + kw) * positions;
        for (std::size_t oh = 0; oh < out.height; ++oh) {
          T* dst = row + oh * out.width;
          const auto ih = static_cast<std::ptrdiff_t>(oh * l.stride + kh) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.height)) {
            std::fill(dst, dst + out.width, T{0});
            continue;
          }
          const T* src = image + (c * in.height + static_cast<std::size_t>(ih)) * in.width;
          for (std::size_t ow = 0; ow < out.width; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * l.stride + kw) - pad;
            dst[ow] = (iw >= 0 && iw < static_cast<std::ptrdiff_t>(in.width))
                          ? src[static_cast<std::size_t>(iw)]
                          : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const FeatureShape& in, const LayerSpec& l, const FeatureShape& out,
                T* image) {
  const std::size_t k = l.kernel;
  const std::size_t positions = out.height * out.width;
  const auto pad = static_cast<std::ptrdiff_t>(l.padding);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        const T* row = col + ((c * k + kh) * k + kw) * positions;
        for (std::size_t oh = 0; oh < out.height; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * l.stride + kh) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.height)) continue;
          const T* src = row + oh * out.width;
          T* dst = image + (c * in.height + static_cast<std::size_t>(ih)) * in.width;
          for (std::size_t ow = 0; ow < out.width; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * l.stride + kw) - pad;
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(in.width)) dst[static_cast<std::size_t>(iw)] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void linear_forward(const LayerSpec& l, std::span<const T> w, std::span<const T> b, const T* x,
                    std::size_t batch, T* y) {
  std::vector<T> wt(l.in * l.out);
  kernels::transpose(w.data(), wt.data(), l.out, l.in);
  kernels::gemm(x, wt.data(), y, batch, l.in, l.out, false);
  for (std::size_t s = 0; s < batch; ++s) {
    T* row = y + s * l.out;
    for (std::size_t o = 0; o < l.out; ++o) row[o] += b[o];
  }
}

template <typename T>
void conv_forward(const LayerSpec& l, const FeatureShape& in, const FeatureShape& out,
                  std::span<const T> w, std::span<const T> b, const T* x, std::size_t batch,
                  T* y, std::vector<T>* keep_columns) {
  const std::size_t window = l.in * l.kernel * l.kernel;
  const std::size_t positions = out.height * out.width;
  std::vector<T> scratch;
  if (keep_columns) {
    keep_columns->assign(batch * window * positions, T{0});
  } else {
    scratch.resize(window * positions);
  }
  for (std::size_t s = 0; s < batch; ++s) {
    T* col = keep_columns ? keep_columns->data() + s * window * positions : scratch.data();
    im2col(x + s * in.size(), in, l, out, col);
    T* ys = y + s * out.size();
    kernels::gemm(w.data(), col, ys, l.out, window, positions, false);
    for (std::size_t o = 0; o < l.out; ++o) {
      T* plane = ys + o * positions;
      for (std::size_t p = 0; p < positions; ++p) plane[p] += b[o];
    }
  }
}

template <typename T>
void maxpool_forward(const LayerSpec& l, const FeatureShape& in, const FeatureShape& out,
                     const T* x, std::size_t batch, T* y, std::uint32_t* winners) {
  for (std::size_t s = 0; s < batch; ++s) {
    const T* xs = x + s * in.size();
    T* ys = y + s * out.size();
    std::uint32_t* ws = winners ? winners + s * out.size() : nullptr;
    for (std::size_t c = 0; c < out.channels; ++c) {
      for (std::size_t oh = 0; oh < out.height; ++oh) {
        for (std::size_t ow = 0; ow < out.width; ++ow) {
          std::size_t best = (c * in.height + oh * l.stride) * in.width + ow * l.stride;
          T best_value = xs[best];
          // Row-major scan with strict '>' keeps the lowest flat index on ties.
          for (std::size_t kh = 0; kh < l.kernel; ++kh) {
            for (std::size_t kw = 0; kw < l.kernel; ++kw) {
              const std::size_t idx =
                  (c * in.height + oh * l.stride + kh) * in.width + ow * l.stride + kw;
              if (xs[idx] > best_value) {
                best_value = xs[idx];
                best = idx;
              }
            }
          }
          const std::size_t o = (c * out.height + oh) * out.width + ow;
          ys[o] = best_value;
          if (ws) ws[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
}

template <typename T>
void log_softmax_forward(const T* z, std::size_t batch, std::size_t classes, T* out) {
  for (std::size_t s = 0; s < batch; ++s) {
    const T* row = z + s * classes;
    T* o = out + s * classes;
    const T m = *std::max_element(row, row + classes);
    T total{0};
    for (std::size_t j = 0; j < classes; ++j) total += std::exp(row[j] - m);
    const T lse = m + std::log(total);
    for (std::size_t j = 0; j < classes; ++j) o[j] = row[j] - lse;
  }
}

template <typename T>
ForwardResult<T> run_forward(const NetworkSpec& spec, const BasicParamSet<T>& params,
                             const BasicTensor<T>& x, bool keep) {
  const FeatureShape& input = spec.input_shape();
  if (x.rank() == 0 || x.dim(0) == 0) throw DimensionError("forward: empty batch");
  const std::size_t batch = x.dim(0);
  if (x.size() != batch * input.size()) {
    throw DimensionError("forward: input " + shape_string(x.shape()) + " does not match network input " +
                         std::to_string(input.channels) + "x" + std::to_string(input.height) + "x" +
                         std::to_string(input.width));
  }
  if (params.weights().size() != spec.layout().weight_count ||
      params.biases().size() != spec.layout().bias_count) {
    throw DimensionError("forward: parameter store does not match network layout");
  }

  const auto& layers = spec.layers();
  ForwardResult<T> result;
  ActivationCache<T>& cache = result.cache;
  cache.batch = batch;
  cache.generation = params.generation();
  cache.weight_count = params.weights().size();
  if (keep) {
    cache.columns.resize(layers.size());
    cache.argmax.resize(layers.size());
  }

  BasicTensor<T> current(Shape{batch, input.channels, input.height, input.width},
                         std::vector<T>(x.data().begin(), x.data().end()));
  std::size_t slice = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const FeatureShape in = spec.input_shape_of(i);
    const FeatureShape out = spec.output_shapes()[i];
    BasicTensor<T> next(Shape{batch, out.channels, out.height, out.width});
    switch (l.kind) {
      case LayerKind::linear:
        linear_forward(l, params.layer_weights(slice), params.layer_biases(slice), current.raw(),
                       batch, next.raw());
        ++slice;
        break;
      case LayerKind::conv2d:
        conv_forward(l, in, out, params.layer_weights(slice), params.layer_biases(slice),
                     current.raw(), batch, next.raw(), keep ? &cache.columns[i] : nullptr);
        ++slice;
        break;
      case LayerKind::relu:
        for (std::size_t j = 0; j < current.size(); ++j) next[j] = current[j] > T{0} ? current[j] : T{0};
        break;
      case LayerKind::maxpool2d: {
        std::uint32_t* winners = nullptr;
        if (keep) {
          cache.argmax[i].resize(batch * out.size());
          winners = cache.argmax[i].data();
        }
        maxpool_forward(l, in, out, current.raw(), batch, next.raw(), winners);
        break;
      }
      case LayerKind::flatten:
        std::copy(current.data().begin(), current.data().end(), next.data().begin());
        break;
      case LayerKind::log_softmax:
        log_softmax_forward(current.raw(), batch, out.size(), next.raw());
        break;
    }
    if (keep) cache.activations.push_back(std::move(current));
    current = std::move(next);
  }
  result.log_probs = current.reshaped(Shape{batch, spec.class_count()});
  if (keep) cache.activations.push_back(std::move(current));
  return result;
}

// Dense dW for a linear layer: dW[o][i] = sum_b dY[b][o] * X[b][i], ascending b.
template <typename T>
void linear_weight_grad(const LayerSpec& l, const T* dy, const T* x, std::size_t batch,
                        std::span<const std::uint8_t> mask, T* dw) {
  std::vector<T> dyt(l.out * batch);
  kernels::transpose(dy, dyt.data(), batch, l.out);
  const std::size_t n = l.in * l.out;
  std::size_t kept = n;
  if (!mask.empty()) kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  if (mask.empty() || static_cast<double>(kept) > kSparseGradientFraction * static_cast<double>(n)) {
    kernels::gemm(dyt.data(), x, dw, l.out, batch, l.in, false);
    if (!mask.empty()) {
      for (std::size_t j = 0; j < n; ++j)
        if (!mask[j]) dw[j] = T{0};
    }
    return;
  }
  std::fill(dw, dw + n, T{0});
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    const std::size_t o = j / l.in;
    const std::size_t i = j % l.in;
    const T* g = dyt.data() + o * batch;
    T acc{0};
    for (std::size_t s = 0; s < batch; ++s) acc += g[s] * x[s * l.in + i];
    dw[j] = acc;
  }
}

// Dense dW for a conv layer: dW[o][l] = sum_{b,p} dY_b[o][p] * col_b[l][p], ascending (b, p).
template <typename T>
void conv_weight_grad(const LayerSpec& l, const FeatureShape& out, const T* dy,
                      const std::vector<T>& columns, std::size_t batch,
                      std::span<const std::uint8_t> mask, T* dw) {
  const std::size_t window = l.in * l.kernel * l.kernel;
  const std::size_t positions = out.height * out.width;
  const std::size_t n = l.out * window;
  std::size_t kept = n;
  if (!mask.empty()) kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  std::fill(dw, dw + n, T{0});
  if (mask.empty() || static_cast<double>(kept) > kSparseGradientFraction * static_cast<double>(n)) {
    std::vector<T> colt(positions * window);
    for (std::size_t s = 0; s < batch; ++s) {
      kernels::transpose(columns.data() + s * window * positions, colt.data(), window, positions);
      kernels::gemm(dy + s * out.size(), colt.data(), dw, l.out, positions, window, true);
    }
    if (!mask.empty()) {
      for (std::size_t j = 0; j < n; ++j)
        if (!mask[j]) dw[j] = T{0};
    }
    return;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    const std::size_t o = j / window;
    const std::size_t r = j % window;
    T acc{0};
    for (std::size_t s = 0; s < batch; ++s) {
      const T* g = dy + s * out.size() + o * positions;
      const T* col = columns.data() + (s * window + r) * positions;
      for (std::size_t p = 0; p < positions; ++p) acc += g[p] * col[p];
    }
    dw[j] = acc;
  }
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const BasicParamSet<T>& params,
                         const BasicTensor<T>& x) {
  return run_forward(spec, params, x, true);
}

template <typename T>
BasicTensor<T> predict(const NetworkSpec& spec, const BasicParamSet<T>& params,
                       const BasicTensor<T>& x) {
  return run_forward(spec, params, x, false).log_probs;
}

template <typename T>
Gradients<T> backward(const NetworkSpec& spec, const BasicParamSet<T>& params,
                      const ActivationCache<T>& cache, std::span<const std::int32_t> labels,
                      std::span<const std::uint8_t> weight_mask) {
  const auto& layers = spec.layers();
  if (cache.activations.size() != layers.size() + 1 || cache.columns.size() != layers.size()) {
    throw UsageError("backward: activation cache does not come from a forward pass of this network");
  }
  if (cache.generation != params.generation() || cache.weight_count != params.weights().size()) {
    throw UsageError("backward: stale activation cache (parameters changed since forward)");
  }
  const std::size_t batch = cache.batch;
  if (labels.size() != batch) {
    throw DimensionError("backward: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  if (!weight_mask.empty() && weight_mask.size() != params.weights().size()) {
    throw DimensionError("backward: weight mask does not match the weight layout");
  }
  const std::size_t classes = spec.class_count();
  for (std::int32_t label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ParameterError("backward: label " + std::to_string(label) + " out of range");
    }
  }

  Gradients<T> grads;
  grads.weights = BasicTensor<T>(Shape{params.weights().size()});
  grads.biases = BasicTensor<T>(Shape{params.biases().size()});
  const BasicTensor<T>& log_probs = cache.activations.back();
  grads.loss = nll_loss(log_probs.reshaped(Shape{batch, classes}), labels);

  // dL/d(log-prob): -1/B at each label.
  BasicTensor<T> upstream(log_probs.shape());
  const T inv_batch = T{1} / static_cast<T>(batch);
  for (std::size_t s = 0; s < batch; ++s) upstream[s * classes + static_cast<std::size_t>(labels[s])] = -inv_batch;

  const ParamLayout& layout = spec.layout();
  std::size_t slice = layout.slices.size();
  // First layer whose input gradient matters.
  std::size_t first_param_layer = layout.slices.empty() ? layers.size() : layout.slices.front().layer;

  for (std::size_t ii = layers.size(); ii-- > 0;) {
    const LayerSpec& l = layers[ii];
    const FeatureShape in = spec.input_shape_of(ii);
    const FeatureShape out = spec.output_shapes()[ii];
    const BasicTensor<T>& x = cache.activations[ii];
    const BasicTensor<T>& y = cache.activations[ii + 1];
    const bool need_input_grad = ii > first_param_layer;
    BasicTensor<T> down;
    if (need_input_grad || !l.has_params()) down = BasicTensor<T>(x.shape());

    switch (l.kind) {
      case LayerKind::log_softmax: {
        for (std::size_t s = 0; s < batch; ++s) {
          const T* g = upstream.raw() + s * classes;
          const T* o = y.raw() + s * classes;
          T* d = down.raw() + s * classes;
          T total{0};
          for (std::size_t j = 0; j < classes; ++j) total += g[j];
          for (std::size_t j = 0; j < classes; ++j) d[j] = g[j] - std::exp(o[j]) * total;
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t j = 0; j < down.size(); ++j) down[j] = y[j] > T{0} ? upstream[j] : T{0};
        break;
      case LayerKind::flatten:
        std::copy(upstream.data().begin(), upstream.data().end(), down.data().begin());
        break;
      case LayerKind::maxpool2d: {
        const auto& winners = cache.argmax[ii];
        for (std::size_t s = 0; s < batch; ++s) {
          T* d = down.raw() + s * in.size();
          const T* g = upstream.raw() + s * out.size();
          const std::uint32_t* w = winners.data() + s * out.size();
          for (std::size_t o = 0; o < out.size(); ++o) d[w[o]] += g[o];
        }
        break;
      }
      case LayerKind::linear: {
        --slice;
        const ParamSlice& ps = layout.slices[slice];
        std::span<const std::uint8_t> mask;
        if (!weight_mask.empty()) mask = weight_mask.subspan(ps.weight_offset, ps.weight_count);
        linear_weight_grad(l, upstream.raw(), x.raw(), batch, mask, grads.weights.raw() + ps.weight_offset);
        T* db = grads.biases.raw() + ps.bias_offset;
        for (std::size_t o = 0; o < l.out; ++o) db[o] = T{0};
        for (std::size_t s = 0; s < batch; ++s) {
          const T* g = upstream.raw() + s * l.out;
          for (std::size_t o = 0; o < l.out; ++o) db[o] += g[o];
        }
        if (need_input_grad) {
          kernels::gemm(upstream.raw(), params.layer_weights(slice).data(), down.raw(), batch, l.out,
                        l.in, false);
        }
        break;
      }
      case LayerKind::conv2d: {
        --slice;
        const ParamSlice& ps = layout.slices[slice];
        std::span<const std::uint8_t> mask;
        if (!weight_mask.empty()) mask = weight_mask.subspan(ps.weight_offset, ps.weight_count);
        conv_weight_grad(l, out, upstream.raw(), cache.columns[ii], batch, mask,
                         grads.weights.raw() + ps.weight_offset);
        const std::size_t positions = out.height * out.width;
        T* db = grads.biases.raw() + ps.bias_offset;
        for (std::size_t o = 0; o < l.out; ++o) db[o] = T{0};
        for (std::size_t s = 0; s < batch; ++s) {
          for (std::size_t o = 0; o < l.out; ++o) {
            const T* g = upstream.raw() + s * out.size() + o * positions;
            for (std::size_t p = 0; p < positions; ++p) db[o] += g[p];
          }
        }
        if (need_input_grad) {
          const std::size_t window = l.in * l.kernel * l.kernel;
          std::vector<T> wt(window * l.out);
          kernels::transpose(params.layer_weights(slice).data(), wt.data(), l.out, window);
          std::vector<T> dcol(window * positions);
          for (std::size_t s = 0; s < batch; ++s) {
            kernels::gemm(wt.data(), upstream.raw() + s * out.size(), dcol.data(), window, l.out,
                          positions, false);
            col2im_add(dcol.data(), in, l, out, down.raw() + s * in.size());
          }
        }
        break;
      }
    }
    if (ii <= first_param_layer && l.has_params()) break;
    upstream = std::move(down);
  }
  return grads;
}

template <typename T>
double nll_loss(const BasicTensor<T>& log_probs, std::span<const std::int32_t> labels) {
  if (log_probs.rank() != 2 || log_probs.dim(0) != labels.size()) {
    throw DimensionError("nll_loss: log-prob rows do not match labels");
  }
  if (labels.empty()) throw ParameterError("nll_loss: empty batch");
  const std::size_t classes = log_probs.dim(1);
  double total = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto label = static_cast<std::size_t>(labels[s]);
    if (labels[s] < 0 || label >= classes) throw ParameterError("nll_loss: label out of range");
    total -= static_cast<double>(log_probs[s * classes + label]);
  }
  return total / static_cast<double>(labels.size());
}

template <typename T>
std::size_t count_correct(const BasicTensor<T>& log_probs, std::span<const std::int32_t> labels) {
  if (log_probs.rank() != 2 || log_probs.dim(0) != labels.size()) {
    throw DimensionError("count_correct: rows do not match labels");
  }
  const std::size_t classes = log_probs.dim(1);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const T* row = log_probs.raw() + s * classes;
    const auto best = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
    if (static_cast<std::int32_t>(best) == labels[s]) ++correct;
  }
  return correct;
}

#define FREEZENET_INSTANTIATE(T)                                                                  \
  template ForwardResult<T> forward(const NetworkSpec&, const BasicParamSet<T>&,                   \
                                    const BasicTensor<T>&);                                        \
  template BasicTensor<T> predict(const NetworkSpec&, const BasicParamSet<T>&,                     \
                                  const BasicTensor<T>&);                                          \
  template Gradients<T> backward(const NetworkSpec&, const BasicParamSet<T>&,                      \
                                 const ActivationCache<T>&, std::span<const std::int32_t>,         \
                                 std::span<const std::uint8_t>);                                   \
  template double nll_loss(const BasicTensor<T>&, std::span<const std::int32_t>);                 \
  template std::size_t count_correct(const BasicTensor<T>&, std::span<const std::int32_t>);

FREEZENET_INSTANTIATE(float)
FREEZENET_INSTANTIATE(double)
#undef FREEZENET_INSTANTIATE

}  // namespace freezenet
