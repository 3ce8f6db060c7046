#include "freezenet/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

namespace freezenet {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " elements");
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return BasicTensor(Shape{r, c}, std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::vector(std::initializer_list<T> values) {
  return BasicTensor(Shape{values.size()}, std::vector<T>(values));
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) +
                         " does not match tensor rank " + std::to_string(shape_.size()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw DimensionError("index " + std::to_string(i) + " out of range on axis " +
                           std::to_string(axis) + " of " + shape_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(index)];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(index)];
}

template <typename T>
T& BasicTensor<T>::at(std::size_t flat) {
  if (flat >= data_.size()) throw DimensionError("flat index out of range");
  return data_[flat];
}

template <typename T>
const T& BasicTensor<T>::at(std::size_t flat) const {
  if (flat >= data_.size()) throw DimensionError("flat index out of range");
  return data_[flat];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
bool BasicTensor<T>::bitwise_equal(const BasicTensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

namespace kernels {

namespace {

// Two 64-byte vectors per row of the register tile.
template <typename T>
constexpr std::size_t kTileWidth = 128 / sizeof(T);

// c[4 x W] over the full k range, accumulators held in registers.
template <typename T, std::size_t W>
void tile_4xw(const T* a, const T* b, T* c, std::size_t k, std::size_t n, bool accumulate) {
  T c0[W], c1[W], c2[W], c3[W];
  for (std::size_t j = 0; j < W; ++j) {
    c0[j] = accumulate ? c[j] : T{0};
    c1[j] = accumulate ? c[n + j] : T{0};
    c2[j] = accumulate ? c[2 * n + j] : T{0};
    c3[j] = accumulate ? c[3 * n + j] : T{0};
  }
  const T* a0 = a;
  const T* a1 = a + k;
  const T* a2 = a + 2 * k;
  const T* a3 = a + 3 * k;
  for (std::size_t l = 0; l < k; ++l) {
    const T* bl = b + l * n;
    const T s0 = a0[l], s1 = a1[l], s2 = a2[l], s3 = a3[l];
    for (std::size_t j = 0; j < W; ++j) {
      const T bv = bl[j];
      c0[j] += s0 * bv;
      c1[j] += s1 * bv;
      c2[j] += s2 * bv;
      c3[j] += s3 * bv;
    }
  }
  for (std::size_t j = 0; j < W; ++j) {
    c[j] = c0[j];
    c[n + j] = c1[j];
    c[2 * n + j] = c2[j];
    c[3 * n + j] = c3[j];
  }
}

// Row i of c, columns [j0, n), streamed.
template <typename T>
void row_tail(const T* a, const T* b, T* c, std::size_t k, std::size_t n, std::size_t j0,
              bool accumulate) {
  if (!accumulate) std::fill(c + j0, c + n, T{0});
  for (std::size_t l = 0; l < k; ++l) {
    const T s = a[l];
    const T* bl = b + l * n;
    for (std::size_t j = j0; j < n; ++j) c[j] += s * bl[j];
  }
}

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  constexpr std::size_t W = kTileWidth<T>;
  const std::size_t full = n - n % W;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < full; j += W) tile_4xw<T, W>(a + i * k, b + j, c + i * n + j, k, n, accumulate);
    if (full < n) {
      for (std::size_t r = i; r < i + 4; ++r) row_tail(a + r * k, b, c + r * n, k, n, full, accumulate);
    }
  }
  for (; i < m; ++i) row_tail(a + i * k, b, c + i * n, k, n, 0, accumulate);
}

template <typename T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t col = c0; col < c1; ++col) out[col * rows + r] = in[r * cols + col];
    }
  }
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void transpose<float>(const float*, float*, std::size_t, std::size_t);
template void transpose<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace kernels

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects matrices, got " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  BasicTensor<T> c(Shape{a.dim(0), b.dim(1)});
  kernels::gemm(a.raw(), b.raw(), c.raw(), a.dim(0), a.dim(1), b.dim(1), false);
  return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects a matrix");
  BasicTensor<T> out(Shape{a.dim(1), a.dim(0)});
  kernels::transpose(a.raw(), out.raw(), a.dim(0), a.dim(1));
  return out;
}

namespace {
template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}
}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> hadamard(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "hadamard");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
double abs_sum(std::span<const T> values) {
  double total = 0.0;
  for (T v : values) total += std::abs(static_cast<double>(v));
  return total;
}

template <typename T>
T max_abs(std::span<const T> values) {
  T best{0};
  for (T v : values) best = std::max(best, std::abs(v));
  return best;
}

#define FREEZENET_INSTANTIATE(T)                                               \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                     \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> hadamard(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                      \
  template double abs_sum(std::span<const T>);                                  \
  template T max_abs(std::span<const T>);

FREEZENET_INSTANTIATE(float)
FREEZENET_INSTANTIATE(double)
#undef FREEZENET_INSTANTIATE

}  // namespace freezenet
