#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "irib/models/network.hpp"
#include "irib/models/prior.hpp"

namespace irib::models {

/// Binary layout: "IRIBCKPT", u32 version, u64 arch-JSON length, arch JSON,
/// u64 parameter count, then per parameter: u32 name length, name, u32 rank,
/// u64 extents, little-endian f64 values.
struct Checkpoint {
  nlohmann::ordered_json arch;
  std::vector<Parameter> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const nlohmann::ordered_json& arch,
                     const std::vector<Parameter>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::ordered_json& j);

/// `kind` names the role ("projector", "restorer", "direct", ...) and is
/// checked on load when `expected_kind` is non-empty.
void save_network(const std::filesystem::path& path, const std::string& kind, const ResidualNet& net);
ResidualNet load_network(const std::filesystem::path& path, const std::string& expected_kind = "");

void save_prior(const std::filesystem::path& path, const PriorScore& prior);
PriorScore load_prior(const std::filesystem::path& path);

/// Copies values by name; throws on a missing name or a shape mismatch.
void assign_parameters(std::vector<Parameter>& dst, const std::vector<Parameter>& src);

}  // namespace irib::models
