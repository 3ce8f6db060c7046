#include "freezenet/selection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "freezenet/propagation.hpp"

namespace freezenet {

FreezeRate FreezeRate::parse(std::string_view text) {
  const std::string original(text);
  auto bad = [&](const std::string& why) {
    return ParameterError("freezing rate '" + original + "': " + why);
  };
  if (text.empty()) throw bad("empty");
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) throw bad("no digits");
  if (frac.size() > 9) throw bad("more than 9 decimal places");
  auto digits_only = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!digits_only(whole) || !digits_only(frac)) throw bad("expected a decimal number");
  std::uint64_t w = 0;
  for (char c : whole) {
    w = w * 10 + static_cast<std::uint64_t>(c - '0');
    if (w > 1) throw bad("must lie in [0, 1)");
  }
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  for (char c : frac) {
    num = num * 10 + static_cast<std::uint64_t>(c - '0');
    den *= 10;
  }
  num += w * den;
  const std::uint64_t g = std::gcd(num, den);
  FreezeRate q{static_cast<std::uint32_t>(num / g), static_cast<std::uint32_t>(den / g)};
  q.validate();
  return q;
}

void FreezeRate::validate() const {
  if (den == 0 || num >= den) {
    throw ParameterError("freezing rate " + std::to_string(num) + "/" + std::to_string(den) +
                         " outside [0, 1)");
  }
}

std::size_t FreezeRate::kept_count(std::size_t weights) const {
  validate();
  const auto product = static_cast<unsigned __int128>(den - num) * weights;
  return static_cast<std::size_t>(product / den);
}

std::string FreezeRate::to_string() const {
  if (num == 0) return "0";
  // den is a power of ten divided by a common factor; recover the decimal form.
  std::uint64_t scaled_den = 1;
  int places = 0;
  while (scaled_den % den != 0 && places < 18) {
    scaled_den *= 10;
    ++places;
  }
  if (scaled_den % den != 0) return std::to_string(num) + "/" + std::to_string(den);
  std::string digits = std::to_string(static_cast<std::uint64_t>(num) * (scaled_den / den));
  digits.insert(0, static_cast<std::size_t>(places) - std::min<std::size_t>(digits.size(), places), '0');
  std::string out = "0." + digits;
  while (out.back() == '0') out.pop_back();
  return out;
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::snip_saliency: return "snip_saliency";
    case ScoreKind::grasp_importance: return "grasp_importance";
    case ScoreKind::random: return "random";
  }
  return "unknown";
}

ScoreVector snip_scores(const NetworkSpec& spec, const ParamSet& params, const Tensor& x,
                        std::span<const std::int32_t> labels) {
  if (labels.empty()) throw ParameterError("snip_scores: empty batch");
  auto fwd = forward(spec, params, x);
  Gradients<float> g = backward(spec, params, fwd.cache, labels);
  ScoreVector out{Tensor64(Shape{params.weights().size()}), ScoreKind::snip_saliency};
  const auto w = params.weights().data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.values[i] = static_cast<double>(g.weights[i]) * static_cast<double>(w[i]);
  }
  return out;
}

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::vector<double> hessian_vector_product(const GradientFn& grad, const std::vector<double>& w,
                                           const std::vector<double>& v) {
  if (w.size() != v.size()) throw DimensionError("hessian_vector_product: w and v differ in length");
  const double eps = 1e-3 * std::max(1.0, inf_norm(w)) / std::max(1e-12, inf_norm(v));
  std::vector<double> plus(w.size());
  std::vector<double> minus(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    plus[i] = w[i] + eps * v[i];
    minus[i] = w[i] - eps * v[i];
  }
  const std::vector<double> gp = grad(plus);
  const std::vector<double> gm = grad(minus);
  if (gp.size() != w.size() || gm.size() != w.size()) {
    throw DimensionError("hessian_vector_product: gradient has the wrong length");
  }
  std::vector<double> hv(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) hv[i] = (gp[i] - gm[i]) / (2.0 * eps);
  return hv;
}

std::vector<double> grasp_importance(const GradientFn& grad, const std::vector<double>& w) {
  const std::vector<double> g = grad(w);
  if (inf_norm(g) == 0.0) {
    throw DegenerateGradientError("GraSP scores undefined: the loss gradient vanishes");
  }
  const std::vector<double> hg = hessian_vector_product(grad, w, g);
  std::vector<double> s(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) s[i] = w[i] * hg[i];
  return s;
}

ScoreVector grasp_scores(const NetworkSpec& spec, const ParamSet& params, const Tensor& x,
                         std::span<const std::int32_t> labels) {
  if (labels.empty()) throw ParameterError("grasp_scores: empty batch");
  const ParamSet64 base = params.cast<double>();
  const Tensor64 x64 = x.cast<double>();
  GradientFn grad = [&](const std::vector<double>& w) {
    ParamSet64 p = base;
    auto& store = p.mutable_weights();
    std::copy(w.begin(), w.end(), store.data().begin());
    auto fwd = forward(spec, p, x64);
    Gradients<double> g = backward(spec, p, fwd.cache, labels);
    return std::vector<double>(g.weights.data().begin(), g.weights.data().end());
  };
  const std::vector<double> w(base.weights().data().begin(), base.weights().data().end());
  std::vector<double> s = grasp_importance(grad, w);
  const std::size_t n = s.size();
  return ScoreVector{Tensor64(Shape{n}, std::move(s)), ScoreKind::grasp_importance};
}

ScoreVector random_scores(const NetworkSpec& spec, RngStream& stream) {
  ScoreVector out{Tensor64(Shape{spec.layout().weight_count}), ScoreKind::random};
  for (double& v : out.values.data()) v = stream.next_unit();
  return out;
}

std::size_t FreezeMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t FreezeMask::layer_popcount(const ParamSlice& slice) const {
  if (slice.weight_offset + slice.weight_count > bits.size()) {
    throw DimensionError("mask shorter than layer slice");
  }
  const auto first = bits.begin() + static_cast<std::ptrdiff_t>(slice.weight_offset);
  return static_cast<std::size_t>(
      std::count(first, first + static_cast<std::ptrdiff_t>(slice.weight_count), std::uint8_t{1}));
}

FreezeMask build_mask(const ScoreVector& scores, FreezeRate q, const NetworkSpec& spec,
                      RngStream& rescue_stream) {
  q.validate();
  const ParamLayout& layout = spec.layout();
  const std::size_t n = layout.weight_count;
  if (scores.values.size() != n) {
    throw DimensionError("build_mask: " + std::to_string(scores.values.size()) +
                         " scores for " + std::to_string(n) + " weights");
  }
  std::vector<double> key(n);
  const bool signed_key = scores.kind == ScoreKind::grasp_importance;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = scores.values[i];
    if (std::isnan(s)) throw ParameterError("build_mask: NaN score at weight " + std::to_string(i));
    key[i] = signed_key ? s : std::abs(s);
  }

  FreezeMask mask;
  mask.q = q;
  mask.kept = q.kept_count(n);
  mask.bits.assign(n, 0);
  if (mask.kept == n) {
    std::fill(mask.bits.begin(), mask.bits.end(), std::uint8_t{1});
  } else if (mask.kept > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
      return key[a] > key[b] || (key[a] == key[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mask.kept - 1),
                     order.end(), before);
    for (std::size_t j = 0; j < mask.kept; ++j) mask.bits[order[j]] = 1;
  }

  for (const ParamSlice& slice : layout.slices) {
    if (slice.weight_count == 0 || mask.layer_popcount(slice) > 0) continue;
    const std::size_t pick = rescue_stream.uniform_below(slice.weight_count);
    mask.bits[slice.weight_offset + pick] = 1;
    ++mask.rescued;
  }
  return mask;
}

FreezeMask full_mask(const NetworkSpec& spec) {
  FreezeMask mask;
  mask.bits.assign(spec.layout().weight_count, 1);
  mask.kept = mask.bits.size();
  return mask;
}

double RealFreezingRate::value() const noexcept {
  return total == 0 ? 0.0 : static_cast<double>(frozen) / static_cast<double>(total);
}

std::string RealFreezingRate::display() const {
  if (total == 0) return "0.000";
  const auto milli = static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(frozen) * 2000 + total) / (2 * static_cast<unsigned __int128>(total)));
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, milli / 1000);
  *r.ptr++ = '.';
  const std::uint64_t rest = milli % 1000;
  *r.ptr++ = static_cast<char>('0' + rest / 100);
  *r.ptr++ = static_cast<char>('0' + rest / 10 % 10);
  *r.ptr++ = static_cast<char>('0' + rest % 10);
  return std::string(buf, r.ptr);
}

RealFreezingRate real_freezing_rate(const FreezeMask& mask, const NetworkSpec& spec) {
  const ParamLayout& layout = spec.layout();
  if (mask.bits.size() != layout.weight_count) {
    throw DimensionError("real_freezing_rate: mask does not match the weight layout");
  }
  RealFreezingRate r;
  r.total = layout.total();
  r.frozen = layout.weight_count - mask.popcount();
  return r;
}

}  // namespace freezenet
