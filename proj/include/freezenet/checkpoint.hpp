#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "freezenet/network.hpp"
#include "freezenet/params.hpp"
#include "freezenet/rng.hpp"
#include "freezenet/selection.hpp"

namespace freezenet {

// How weights outside the mask are recovered on load.
enum class FrozenPolicy : std::uint8_t {
  regenerate = 0,  // redrawn from (scheme, purpose, seed)
  zero = 1,        // pruned: exactly +0
  stored = 2,      // every weight is in the payload
};

enum class MaskCodec : std::uint8_t { raw_bitset = 0, index_varint = 1 };

std::string_view to_string(FrozenPolicy policy);
FrozenPolicy parse_frozen_policy(std::string_view text);
std::string_view to_string(MaskCodec codec);

struct CheckpointMeta {
  std::uint32_t epoch_of_best = 0;
  float val_acc = 0.0f;
  bool operator==(const CheckpointMeta&) const = default;
};

// In-memory form of one FZNT file. README.md has the byte layout.
struct Checkpoint {
  NetworkSpec spec;
  InitScheme scheme = InitScheme::xavier_normal;
  RngPurpose purpose = RngPurpose::init;  // init, or reinit after reinitialization
  std::uint64_t seed = 0;
  FreezeRate q;
  FrozenPolicy policy = FrozenPolicy::regenerate;
  std::uint64_t frozen_digest = 0;  // FNV-1a over the bit patterns of non-kept weights
  FreezeMask mask;                  // q and kept are informational; bits are authoritative
  std::vector<float> weights;       // kept weights in ascending index (all of them when stored)
  std::vector<float> biases;
  CheckpointMeta meta;

  explicit Checkpoint(NetworkSpec s) : spec(std::move(s)) {}
};

// FNV-1a 64 over the little-endian bytes of every weight with m = 0.
std::uint64_t frozen_digest(std::span<const float> weights, const FreezeMask& mask);

// Builds a checkpoint for `snapshot`. For regenerate and zero policies the
// non-kept slots must match what the policy reproduces bit for bit, else
// IntegrityError.
Checkpoint make_checkpoint(const NetworkSpec& spec, const ParamSet& snapshot, const FreezeMask& mask,
                           InitScheme scheme, RngPurpose purpose, std::uint64_t seed,
                           FrozenPolicy policy, CheckpointMeta meta = {});

// Cheapest policy that reproduces `snapshot`: regenerate, then zero, then stored.
FrozenPolicy choose_policy(const NetworkSpec& spec, const ParamSet& snapshot, const FreezeMask& mask,
                           InitScheme scheme, RngPurpose purpose, std::uint64_t seed);

// Raw LSB-first bitset, or varint(count) followed by varint gaps
// (index - previous - 1, previous starting at -1). Picks the smaller; ties go raw.
std::vector<std::uint8_t> encode_mask(const FreezeMask& mask, MaskCodec& chosen);
// Forces one codec.
std::vector<std::uint8_t> encode_mask_as(const FreezeMask& mask, MaskCodec codec);
std::vector<std::uint8_t> decode_mask(MaskCodec codec, std::span<const std::uint8_t> payload,
                                      std::size_t weight_count);

std::vector<std::uint8_t> encode(const Checkpoint& ckpt);
// Structural decode. Throws CodecError naming the failing section; a CRC
// mismatch throws IntegrityError.
Checkpoint decode(std::span<const std::uint8_t> bytes);

struct Restored {
  NetworkSpec spec;
  ParamSet params;
  FreezeMask mask;
  CheckpointMeta meta;
};

// Rebuilds the full parameter set. Throws IntegrityError when the recovered
// non-kept weights do not match the stored digest.
Restored restore(const Checkpoint& ckpt);

// Size accounting that counts only trained values (kept weights + biases)
// at 4 bytes each, in KiB, next to the true file size.
struct SizeReport {
  double reported_kib = 0.0;
  double baseline_kib = 0.0;         // every parameter, dense
  double compression_factor = 0.0;   // round1(baseline_kib) / round1(reported_kib)
  double exact_factor = 0.0;         // baseline_kib / reported_kib
  std::size_t trained_values = 0;
  std::size_t encoded_mask_bytes = 0;
  std::size_t raw_mask_bytes = 0;
  std::size_t on_disk_bytes = 0;
};

SizeReport size_report(const Checkpoint& ckpt);

// One decimal, half away from zero.
double round1(double v);

}  // namespace freezenet
