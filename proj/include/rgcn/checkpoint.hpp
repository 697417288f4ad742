#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rgcn/encoder.hpp"
#include "rgcn/graph.hpp"

namespace rgcn {

enum class TaskKind { classify, linkpred };

std::string to_string(TaskKind task);

/// Everything needed to rebuild a trained model. `config_json` is an opaque
/// JSON object (the resolved run configuration).
template <typename Scalar>
struct ModelCheckpoint {
  TaskKind task = TaskKind::linkpred;
  std::vector<std::string> entities;
  std::vector<std::string> relations;  // canonical relations
  std::vector<std::string> classes;
  NormalizationMode normalization = NormalizationMode::per_relation;
  std::string config_json = "{}";
  Encoder<Scalar> encoder;
  std::optional<Tensor<Scalar>> diagonals;  // link prediction only
};

struct CheckpointHeader {
  std::uint32_t version = 0;
  TaskKind task = TaskKind::linkpred;
  int precision = 64;  // bits per scalar
};

/// Binary container:
///   "RGCNCKPT" | u32 version | u64 n | n bytes of JSON metadata |
///   raw little-endian tensors in metadata order | u64 FNV-1a of all prior bytes
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint<Scalar>& ckpt);

/// Bit-exact inverse of save_checkpoint. Throws DataError for a missing or
/// truncated file, a bad magic, an unsupported version, a checksum mismatch,
/// inconsistent metadata, or a precision other than Scalar's.
template <typename Scalar>
ModelCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Reads and verifies only what is needed to dispatch on task and precision.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace rgcn
