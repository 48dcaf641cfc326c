// Model checkpoints: a JSON manifest (layer names, shapes, normalization,
// training config, format version) next to a little-endian float64 blob with
// the raw weights in manifest order. Loading restores predictions bit-exactly.
#pragma once

#include <string>

#include <json.hpp>

#include "embryostage/pointnet.hpp"

namespace embryostage {

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `path` (JSON manifest) and `path` + ".bin" (weights).
void save_checkpoint(const std::string& path, const PointNetModel& model,
                     const NormalizationSpec& normalization,
                     const nlohmann::json& train_config);

struct LoadedCheckpoint {
  PointNetModel model;
  NormalizationSpec normalization;
  nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

nlohmann::json normalization_to_json(const NormalizationSpec& spec);
NormalizationSpec normalization_from_json(const nlohmann::json& j);

}  // namespace embryostage
