#pragma once

#include <filesystem>

#include "json.hpp"

#include "cmap/autodiff.hpp"

namespace cmap::ad {

// Parameter manifest: [{"name": str, "shape": [rows, cols], "values": [row-major...]}, ...]
// Doubles are written in shortest round-trip form, so a save/load cycle is exact.

nlohmann::json params_to_json(const ParamSet& params);

/// Builds a fresh set from a manifest.
ParamSet params_from_json(const nlohmann::json& manifest);

/// Overwrites values of an existing set; names and shapes must match exactly.
void load_params_into(const nlohmann::json& manifest, ParamSet& params);

}  // namespace cmap::ad
