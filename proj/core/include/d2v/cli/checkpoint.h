#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2v/num/tensor.h"

namespace d2v::cli {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
  int format_version = kCheckpointVersion;
  std::string config_hash;
  std::string model_kind;
  nlohmann::json model_config;  // Model::config()
  nlohmann::json metrics;       // metric snapshot at save time
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, num::Tensor>> blocks;
};

// Binary layout, all integers little-endian:
//   magic "D2VCKPT\0" | u32 format_version | u64 n | n bytes header JSON |
//   u64 block count | per block: u32 name length, name, u32 rank,
//   u64 dims[rank], float64 values | u64 FNV-1a of every preceding byte.
// The file is written next to its destination and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const num::ParameterStore& params);
std::string checkpoint_bytes(const CheckpointHeader& header, const num::ParameterStore& params);

// Throws FormatError on a bad magic, an unsupported version, truncation or a
// checksum mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes);

// Copies block values into `params`. Every block is checked against the
// store (names and shapes, both directions) before any value is written;
// throws FormatError naming the first offending block.
void restore_parameters(const Checkpoint& checkpoint, num::ParameterStore& params);

}  // namespace d2v::cli
