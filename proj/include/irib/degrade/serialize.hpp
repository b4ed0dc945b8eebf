#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "irib/degrade/degradation.hpp"

namespace irib::degrade {

/// Canonical JSON with a fixed field order. Doubles are written with the
/// shortest representation that reads back to the same value.
nlohmann::ordered_json manifest_to_json(const DegradationManifest& m);
DegradationManifest manifest_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json preset_to_json(const DegradationPreset& p);
DegradationPreset preset_from_json(const nlohmann::ordered_json& j);

/// Preset by name: "lq", "elq" or "identity".
DegradationPreset preset_by_name(const std::string& name);

void save_manifest(const DegradationManifest& m, const std::filesystem::path& path);
DegradationManifest load_manifest(const std::filesystem::path& path);

}  // namespace irib::degrade
