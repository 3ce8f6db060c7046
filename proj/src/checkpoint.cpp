#include "freezenet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <optional>

#include <zlib.h>

namespace freezenet {

namespace {

constexpr char kMagic[4] = {'F', 'Z', 'N', 'T'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void length(std::size_t n, const char* section) {
    if (n > 0xFFFFFFFFu) throw CodecError(section, "too large for a 32-bit length field");
    le(static_cast<std::uint32_t>(n));
  }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* section) {
    if (in_.size() - pos_ < n) throw CodecError(section, "truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U le(const char* section) {
    auto s = take(sizeof(U), section);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return v;
  }
  float f32(const char* section) { return std::bit_cast<float>(le<std::uint32_t>(section)); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) throw CodecError("mask", "truncated varint");
    const std::uint8_t b = in[pos++];
    v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
    if (!(b & 0x80)) return v;
  }
  throw CodecError("mask", "varint longer than 64 bits");
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

ParamSet regenerate(const NetworkSpec& spec, InitScheme scheme, RngPurpose purpose, std::uint64_t seed) {
  if (purpose != RngPurpose::init && purpose != RngPurpose::reinit) {
    throw CodecError("scheme", "initialization purpose must be init or reinit");
  }
  RngStream stream(seed, purpose);
  return init_params<float>(spec, scheme, stream);
}

bool frozen_slots_match(std::span<const float> actual, std::span<const float> expected,
                        const FreezeMask& mask) {
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!mask.bits[i] &&
        std::bit_cast<std::uint32_t>(actual[i]) != std::bit_cast<std::uint32_t>(expected[i])) {
      return false;
    }
  }
  return true;
}

bool frozen_slots_zero(std::span<const float> actual, const FreezeMask& mask) {
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!mask.bits[i] && std::bit_cast<std::uint32_t>(actual[i]) != 0u) return false;
  }
  return true;
}

void check_mask(const NetworkSpec& spec, const FreezeMask& mask) {
  if (mask.bits.size() != spec.layout().weight_count) {
    throw DimensionError("checkpoint: mask does not match the weight layout");
  }
}

}  // namespace

std::string_view to_string(FrozenPolicy policy) {
  switch (policy) {
    case FrozenPolicy::regenerate: return "regenerate";
    case FrozenPolicy::zero: return "zero";
    case FrozenPolicy::stored: return "stored";
  }
  return "unknown";
}

FrozenPolicy parse_frozen_policy(std::string_view text) {
  if (text == "regenerate") return FrozenPolicy::regenerate;
  if (text == "zero") return FrozenPolicy::zero;
  if (text == "stored") return FrozenPolicy::stored;
  throw ParameterError("unknown frozen-weight policy '" + std::string(text) + "'");
}

std::string_view to_string(MaskCodec codec) {
  switch (codec) {
    case MaskCodec::raw_bitset: return "raw_bitset";
    case MaskCodec::index_varint: return "index_varint";
  }
  return "unknown";
}

std::uint64_t frozen_digest(std::span<const float> weights, const FreezeMask& mask) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (mask.bits[i]) continue;
    const std::uint32_t v = std::bit_cast<std::uint32_t>(weights[i]);
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

Checkpoint make_checkpoint(const NetworkSpec& spec, const ParamSet& snapshot, const FreezeMask& mask,
                           InitScheme scheme, RngPurpose purpose, std::uint64_t seed,
                           FrozenPolicy policy, CheckpointMeta meta) {
  check_mask(spec, mask);
  const auto w = snapshot.weights().data();
  if (w.size() != spec.layout().weight_count || snapshot.biases().size() != spec.layout().bias_count) {
    throw DimensionError("checkpoint: parameters do not match the architecture");
  }
  if (policy == FrozenPolicy::regenerate) {
    const ParamSet init = regenerate(spec, scheme, purpose, seed);
    if (!frozen_slots_match(w, init.weights().data(), mask)) {
      throw IntegrityError("frozen weights", "snapshot differs from the weights regenerated from seed " +
                                                 std::to_string(seed));
    }
  } else if (policy == FrozenPolicy::zero && !frozen_slots_zero(w, mask)) {
    throw IntegrityError("frozen weights", "pruned weights are not all +0");
  }

  Checkpoint c(spec);
  c.scheme = scheme;
  c.purpose = purpose;
  c.seed = seed;
  c.q = mask.q;
  c.policy = policy;
  c.frozen_digest = frozen_digest(w, mask);
  c.mask = mask;
  if (policy == FrozenPolicy::stored) {
    c.weights.assign(w.begin(), w.end());
  } else {
    c.weights.reserve(mask.popcount());
    for (std::size_t i = 0; i < w.size(); ++i)
      if (mask.bits[i]) c.weights.push_back(w[i]);
  }
  c.biases.assign(snapshot.biases().data().begin(), snapshot.biases().data().end());
  c.meta = meta;
  return c;
}

FrozenPolicy choose_policy(const NetworkSpec& spec, const ParamSet& snapshot, const FreezeMask& mask,
                           InitScheme scheme, RngPurpose purpose, std::uint64_t seed) {
  check_mask(spec, mask);
  const auto w = snapshot.weights().data();
  const ParamSet init = regenerate(spec, scheme, purpose, seed);
  if (frozen_slots_match(w, init.weights().data(), mask)) return FrozenPolicy::regenerate;
  if (frozen_slots_zero(w, mask)) return FrozenPolicy::zero;
  return FrozenPolicy::stored;
}

std::vector<std::uint8_t> encode_mask_as(const FreezeMask& mask, MaskCodec codec) {
  std::vector<std::uint8_t> out;
  if (codec == MaskCodec::raw_bitset) {
    out.assign((mask.bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
      if (mask.bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
  }
  put_varint(out, mask.popcount());
  std::uint64_t next = 0;  // previous index + 1
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    put_varint(out, i - next);
    next = i + 1;
  }
  return out;
}

std::vector<std::uint8_t> encode_mask(const FreezeMask& mask, MaskCodec& chosen) {
  auto raw = encode_mask_as(mask, MaskCodec::raw_bitset);
  // The varint form is at least one byte per kept index; skip it when that alone loses.
  if (mask.popcount() >= raw.size()) {
    chosen = MaskCodec::raw_bitset;
    return raw;
  }
  auto packed = encode_mask_as(mask, MaskCodec::index_varint);
  if (packed.size() < raw.size()) {
    chosen = MaskCodec::index_varint;
    return packed;
  }
  chosen = MaskCodec::raw_bitset;
  return raw;
}

std::vector<std::uint8_t> decode_mask(MaskCodec codec, std::span<const std::uint8_t> payload,
                                      std::size_t weight_count) {
  std::vector<std::uint8_t> bits(weight_count, 0);
  if (codec == MaskCodec::raw_bitset) {
    if (payload.size() != (weight_count + 7) / 8) {
      throw CodecError("mask", "raw bitset holds " + std::to_string(payload.size()) + " bytes for " +
                                   std::to_string(weight_count) + " weights");
    }
    for (std::size_t i = 0; i < weight_count; ++i) bits[i] = (payload[i / 8] >> (i % 8)) & 1u;
    for (std::size_t i = weight_count; i < payload.size() * 8; ++i) {
      if ((payload[i / 8] >> (i % 8)) & 1u) throw CodecError("mask", "padding bits set");
    }
    return bits;
  }
  if (codec != MaskCodec::index_varint) throw CodecError("mask", "unknown codec");
  std::size_t pos = 0;
  const std::uint64_t count = get_varint(payload, pos);
  if (count > weight_count) throw CodecError("mask", "more kept indices than weights");
  std::uint64_t next = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t gap = get_varint(payload, pos);
    if (gap >= weight_count - next) throw CodecError("mask", "kept index out of range");
    const std::uint64_t idx = next + gap;
    bits[idx] = 1;
    next = idx + 1;
  }
  if (pos != payload.size()) throw CodecError("mask", "trailing bytes after kept indices");
  return bits;
}

std::vector<std::uint8_t> encode(const Checkpoint& c) {
  check_mask(c.spec, c.mask);
  Writer w;
  w.bytes(kMagic, 4);
  w.le(kVersion);
  const std::string desc = c.spec.descriptor();
  w.length(desc.size(), "architecture");
  w.bytes(desc.data(), desc.size());
  w.le(static_cast<std::uint8_t>(static_cast<unsigned>(c.scheme) | (static_cast<unsigned>(c.purpose) << 4)));
  w.le(c.seed);
  w.le(c.q.num);
  w.le(c.q.den);
  w.le(static_cast<std::uint8_t>(c.policy));
  w.le(c.frozen_digest);
  MaskCodec codec = MaskCodec::raw_bitset;
  const auto payload = encode_mask(c.mask, codec);
  w.le(static_cast<std::uint8_t>(codec));
  w.length(payload.size(), "mask");
  w.bytes(payload.data(), payload.size());
  w.length(c.weights.size(), "weights");
  for (float v : c.weights) w.f32(v);
  w.length(c.biases.size(), "biases");
  for (float v : c.biases) w.f32(v);
  w.le(c.meta.epoch_of_best);
  w.f32(c.meta.val_acc);
  w.le(crc_of(w.out()));
  return std::move(w.out());
}

Checkpoint decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 4) throw CodecError("header", "truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CodecError("header", "bad magic (expected FZNT)");
  if (bytes.size() < 4 + 2 + 4 + 4) throw CodecError("checksum", "truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.subspan(bytes.size() - 4));
  const auto stored_crc = tail.le<std::uint32_t>("checksum");

  Reader r(body);
  r.take(4, "header");
  const auto version = r.le<std::uint16_t>("header");
  if (version != kVersion) {
    throw CodecError("header", "unsupported version " + std::to_string(version) + " (expected " +
                                   std::to_string(kVersion) + ")");
  }
  if (crc_of(body) != stored_crc) throw IntegrityError("checksum", "CRC-32 mismatch");

  const auto desc_len = r.le<std::uint32_t>("architecture");
  const auto desc = r.take(desc_len, "architecture");
  std::optional<NetworkSpec> spec;
  try {
    spec.emplace(NetworkSpec::from_descriptor(
        std::string_view(reinterpret_cast<const char*>(desc.data()), desc.size())));
  } catch (const DimensionError& e) {
    throw CodecError("architecture", e.what());
  }
  Checkpoint c(*spec);
  const ParamLayout& layout = c.spec.layout();

  const auto scheme_byte = r.le<std::uint8_t>("scheme");
  if ((scheme_byte & 0x0F) > static_cast<unsigned>(InitScheme::pm_sigma)) {
    throw CodecError("scheme", "unknown init scheme id " + std::to_string(scheme_byte & 0x0F));
  }
  c.scheme = static_cast<InitScheme>(scheme_byte & 0x0F);
  const unsigned purpose = scheme_byte >> 4;
  if (purpose != static_cast<unsigned>(RngPurpose::init) && purpose != static_cast<unsigned>(RngPurpose::reinit)) {
    throw CodecError("scheme", "initialization purpose must be init or reinit");
  }
  c.purpose = static_cast<RngPurpose>(purpose);
  c.seed = r.le<std::uint64_t>("seed");
  c.q.num = r.le<std::uint32_t>("rate");
  c.q.den = r.le<std::uint32_t>("rate");
  try {
    c.q.validate();
  } catch (const ParameterError& e) {
    throw CodecError("rate", e.what());
  }
  const auto policy = r.le<std::uint8_t>("policy");
  if (policy > static_cast<unsigned>(FrozenPolicy::stored)) {
    throw CodecError("policy", "unknown frozen-weight policy " + std::to_string(policy));
  }
  c.policy = static_cast<FrozenPolicy>(policy);
  c.frozen_digest = r.le<std::uint64_t>("policy");

  const auto codec = r.le<std::uint8_t>("mask");
  if (codec > static_cast<unsigned>(MaskCodec::index_varint)) {
    throw CodecError("mask", "unknown codec " + std::to_string(codec));
  }
  const auto mask_len = r.le<std::uint32_t>("mask");
  c.mask.bits = decode_mask(static_cast<MaskCodec>(codec), r.take(mask_len, "mask"), layout.weight_count);
  c.mask.q = c.q;
  c.mask.kept = c.q.kept_count(layout.weight_count);
  const std::size_t pop = c.mask.popcount();
  c.mask.rescued = pop > c.mask.kept ? pop - c.mask.kept : 0;

  const auto n_w = r.le<std::uint32_t>("weights");
  const std::size_t expected_w = c.policy == FrozenPolicy::stored ? layout.weight_count : pop;
  if (n_w != expected_w) {
    throw CodecError("weights", "holds " + std::to_string(n_w) + " values, expected " +
                                    std::to_string(expected_w));
  }
  const auto wbytes = r.take(std::size_t{n_w} * 4, "weights");
  c.weights.resize(n_w);
  for (std::size_t i = 0; i < n_w; ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t{wbytes[4 * i + b]} << (8 * b);
    c.weights[i] = std::bit_cast<float>(v);
  }
  const auto n_b = r.le<std::uint32_t>("biases");
  if (n_b != layout.bias_count) {
    throw CodecError("biases", "holds " + std::to_string(n_b) + " values, expected " +
                                   std::to_string(layout.bias_count));
  }
  c.biases.resize(n_b);
  for (std::size_t i = 0; i < n_b; ++i) c.biases[i] = r.f32("biases");
  c.meta.epoch_of_best = r.le<std::uint32_t>("metadata");
  c.meta.val_acc = r.f32("metadata");
  if (r.remaining() != 0) throw CodecError("metadata", "trailing bytes before checksum");
  return c;
}

Restored restore(const Checkpoint& c) {
  check_mask(c.spec, c.mask);
  const ParamLayout& layout = c.spec.layout();
  ParamSet params(layout);
  switch (c.policy) {
    case FrozenPolicy::regenerate:
      params = regenerate(c.spec, c.scheme, c.purpose, c.seed);
      break;
    case FrozenPolicy::zero:
    case FrozenPolicy::stored:
      break;
  }
  auto& weights = params.mutable_weights();
  if (c.policy == FrozenPolicy::stored) {
    if (c.weights.size() != layout.weight_count) throw CodecError("weights", "wrong value count");
    std::copy(c.weights.begin(), c.weights.end(), weights.data().begin());
  } else {
    std::size_t k = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!c.mask.bits[i]) continue;
      if (k >= c.weights.size()) throw CodecError("weights", "fewer values than kept weights");
      weights[i] = c.weights[k++];
    }
    if (k != c.weights.size()) throw CodecError("weights", "more values than kept weights");
  }
  if (c.biases.size() != layout.bias_count) throw CodecError("biases", "wrong value count");
  std::copy(c.biases.begin(), c.biases.end(), params.mutable_biases().data().begin());

  if (frozen_digest(params.weights().data(), c.mask) != c.frozen_digest) {
    throw IntegrityError("frozen weights", "recovered frozen weights do not match the stored digest (wrong seed or scheme?)");
  }
  Restored out{c.spec, std::move(params), c.mask, c.meta};
  return out;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

SizeReport size_report(const Checkpoint& c) {
  const ParamLayout& layout = c.spec.layout();
  SizeReport s;
  s.trained_values = c.mask.popcount() + layout.bias_count;
  s.reported_kib = static_cast<double>(s.trained_values) * 4.0 / 1024.0;
  s.baseline_kib = static_cast<double>(layout.total()) * 4.0 / 1024.0;
  s.exact_factor = s.baseline_kib / s.reported_kib;
  s.compression_factor = round1(round1(s.baseline_kib) / round1(s.reported_kib));
  MaskCodec codec = MaskCodec::raw_bitset;
  s.encoded_mask_bytes = encode_mask(c.mask, codec).size();
  s.raw_mask_bytes = (layout.weight_count + 7) / 8;
  s.on_disk_bytes = encode(c).size();
  return s;
}

}  // namespace freezenet
