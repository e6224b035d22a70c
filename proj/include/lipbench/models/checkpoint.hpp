#pragma once

#include <string>

#include "lipbench/models/model.hpp"

namespace lipbench::models {

inline constexpr const char* kCheckpointMagic = "lipbench-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Writes the spec, tensor names and shapes in the header and every tensor
/// (parameters and normalisation buffers) as raw float64 in store order.
/// `metadata` is stored verbatim under the "metadata" key.
void save_checkpoint(const std::string& path, const Model& model, const Json& metadata = Json::object());

struct LoadedCheckpoint {
  Model model;
  Json metadata;
};

/// Bit-exact inverse of save_checkpoint. Throws DataError on any mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lipbench::models
