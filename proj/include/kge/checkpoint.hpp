#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "kge/model.hpp"

namespace kge {

inline constexpr char kCheckpointMagic[] = "KGECKPT1";

enum class CheckpointErrorCode { kBadMagic, kBadMetadata, kTruncatedPayload, kShapeMismatch, kIo };

struct CheckpointError : std::runtime_error {
  CheckpointErrorCode code;
  CheckpointError(CheckpointErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct CheckpointMeta {
  ModelKind kind = ModelKind::kComplEx;
  int dim = 0;
  int channels = 0;
  std::int64_t num_entities = 0;
  std::int64_t num_relations = 0;  // augmented count
  std::uint64_t seed = 0;
  std::uint64_t vocab_hash = 0;
  std::int64_t epoch = 0;
};

struct Checkpoint {
  CheckpointMeta meta;
  ModelParams params;
};

// Format: ASCII magic line, `key=value` metadata lines, one blank line, then
// the raw little-endian IEEE-754 doubles in a fixed order (entity re plane,
// entity im plane, relation re, relation im, then for the gated model:
// kernels, affine weight row-major, affine bias, and per batch-norm layer
// scale/shift/running-mean/running-var). The round trip is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t vocab_hash, std::int64_t epoch);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Number of payload scalars implied by the metadata (trainable parameters
// plus batch-norm running statistics).
std::size_t checkpoint_payload_size(const CheckpointMeta& meta);

}  // namespace kge
