#pragma once

// Binary model checkpoints.
//
// Layout (all integers unsigned little-endian, all reals IEEE-754 binary64
// little-endian):
//
//   magic        8 bytes  "SSLTCKPT"
//   version      u32      currently 1
//   config_hash  u64
//   n_layers     u32      embedding layers
//   per layer:   u32 rows, u32 cols, rows*cols weights (row-major), rows biases
//   head g:      u32 rows, u32 cols, weights, biases
//   head g':     u32 rows, u32 cols, weights, biases
//   checksum     u64      FNV-1a over every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>

#include "sslt/netcore.hpp"

namespace sslt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelState model;
  std::uint64_t config_hash = 0;
};

std::string encode_checkpoint(const ModelState& model, std::uint64_t config_hash);
/// Throws DataError on bad magic, unknown version, truncation or checksum mismatch.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelState& model, std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sslt
