#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aat/json_io.hpp"
#include "aat/model.hpp"

namespace aat {

// Binary layout, all integers little-endian:
//   "AATD" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 ndim | ndim x u32 extents |
//               raw f32 values
//   u32 metadata length | UTF-8 JSON metadata
// The metadata carries the backbone so a checkpoint can be loaded without an
// external config.
struct CheckpointMeta {
  std::string config_hash;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  Json extra = Json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const CheckpointMeta& meta);
void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& path);

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
};

LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "checkpoint");
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies the stored tensors into an existing model. Every tensor must match
// by name and shape; the first mismatch is reported with both shapes.
CheckpointMeta load_checkpoint_into(Model& model, const std::filesystem::path& path);

}  // namespace aat
