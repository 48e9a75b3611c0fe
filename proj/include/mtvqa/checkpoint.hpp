#pragma once

// Checkpoints: a JSON manifest (names, shapes, byte offsets, step, config
// hash, model config) next to a raw little-endian float32 blob.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtvqa/model.hpp"

namespace mtvqa {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // bytes into the blob
  std::uint64_t count = 0;   // float32 values
};

struct CheckpointManifest {
  std::int64_t step = 0;
  std::string config_hash;
  ModelConfig model;
  std::string blob;  // file name, relative to the manifest
  std::vector<CheckpointEntry> entries;
};

/// Writes `<manifest>` and the blob `<manifest stem>.bin` beside it.
void save_checkpoint(const std::filesystem::path& manifest, const Model<float>& model,
                     std::int64_t step, const std::string& config_hash);

CheckpointManifest read_manifest(const std::filesystem::path& manifest);

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointManifest manifest;
  std::vector<std::string> warnings;
};

/// Rebuilds the model from the manifest's config and fills it from the blob.
/// Shape or name mismatches throw LoadError. A config hash differing from
/// `expected_hash` adds a warning (also printed to stderr).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest,
                                 const std::optional<std::string>& expected_hash = std::nullopt);

}  // namespace mtvqa
