#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "freezenet/network.hpp"
#include "freezenet/params.hpp"
#include "freezenet/rng.hpp"
#include "freezenet/tensor.hpp"

namespace freezenet {

// Freezing rate q held as an exact fraction num/den, so that the kept count
// floor((1 - q) * |W|) is computed without binary rounding (in double,
// (1 - 0.9) * 430500 is 43049.99...).
struct FreezeRate {
  std::uint32_t num = 0;
  std::uint32_t den = 1;

  // Decimal text such as "0.999" (at most 9 fractional digits) or "0".
  static FreezeRate parse(std::string_view text);
  static FreezeRate zero() { return FreezeRate{}; }

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::size_t kept_count(std::size_t weights) const;
  std::string to_string() const;
  // Throws ParameterError unless 0 <= q < 1 and den > 0.
  void validate() const;

  bool operator==(const FreezeRate&) const = default;
};

enum class ScoreKind : std::uint8_t { snip_saliency, grasp_importance, random };

std::string_view to_string(ScoreKind kind);

struct ScoreVector {
  Tensor64 values;  // aligned with ParamSet::weights()
  ScoreKind kind = ScoreKind::snip_saliency;
};

// g = dL/dW ⊙ W from one forward/backward pass over (x, labels).
ScoreVector snip_scores(const NetworkSpec& spec, const ParamSet& params, const Tensor& x,
                        std::span<const std::int32_t> labels);

// Gradient oracle over a flat vector: returns dL/dw at w.
using GradientFn = std::function<std::vector<double>(const std::vector<double>&)>;

// H·v by central differences of the gradient:
//   (grad(w + eps v) - grad(w - eps v)) / (2 eps),
//   eps = 1e-3 * max(1, |w|_inf) / max(1e-12, |v|_inf).
std::vector<double> hessian_vector_product(const GradientFn& grad, const std::vector<double>& w,
                                           const std::vector<double>& v);

// S = w ⊙ (H·g) with g = grad(w). Throws DegenerateGradientError when g == 0.
std::vector<double> grasp_importance(const GradientFn& grad, const std::vector<double>& w);

// GraSP importance on the network, evaluated entirely in 64-bit. Biases are
// held fixed; only weights are perturbed.
ScoreVector grasp_scores(const NetworkSpec& spec, const ParamSet& params, const Tensor& x,
                         std::span<const std::int32_t> labels);

// Uniform [0, 1) score per weight; ranking them yields a uniformly random mask.
ScoreVector random_scores(const NetworkSpec& spec, RngStream& stream);

struct FreezeMask {
  std::vector<std::uint8_t> bits;  // 1 = trainable, one per weight
  FreezeRate q;
  std::size_t kept = 0;     // floor((1 - q) * |W|)
  std::size_t rescued = 0;  // bits added by the per-layer rescue rule

  std::size_t popcount() const noexcept;
  std::size_t size() const noexcept { return bits.size(); }
  // Set bits inside one layer slice.
  std::size_t layer_popcount(const ParamSlice& slice) const;
  bool operator==(const FreezeMask&) const = default;
};

// Keeps the k largest keys (|score| for snip/random, signed score for GraSP);
// equal keys favor the lower flat index. Then every layer left without a
// trainable weight gets one uniformly drawn from `rescue_stream`, in layer order.
FreezeMask build_mask(const ScoreVector& scores, FreezeRate q, const NetworkSpec& spec,
                      RngStream& rescue_stream);

// Everything trainable (q = 0).
FreezeMask full_mask(const NetworkSpec& spec);

// q_beta = 1 - (popcount + |B|) / (|W| + |B|) as the exact fraction frozen / total.
struct RealFreezingRate {
  std::uint64_t frozen = 0;
  std::uint64_t total = 0;

  double value() const noexcept;
  // Rounded half-up to 3 decimals from the exact fraction, e.g. "0.899".
  std::string display() const;
};

RealFreezingRate real_freezing_rate(const FreezeMask& mask, const NetworkSpec& spec);

}  // namespace freezenet
