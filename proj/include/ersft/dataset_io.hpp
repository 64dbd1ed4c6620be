#pragma once

#include <cstdint>
#include <filesystem>

#include "ersft/bandit.hpp"
#include "json.hpp"

namespace ersft {

using Json = nlohmann::json;

Json noise_to_json(const NoiseModel& noise);
NoiseModel noise_from_json(const Json& j);

Json env_to_json(const SyntheticEnvironment& env);
SyntheticEnvironment env_from_json(const Json& j);

/// Writes one {"s","a","r"} record per line (plus "traj"/"t" in trajectory
/// mode and "pos" in sequence mode) and a sidecar manifest with catalog sizes,
/// seed and noise spec. `extra` is merged into the manifest.
void write_dataset(const OfflineDataset& ds, const std::filesystem::path& records,
                   const std::filesystem::path& manifest, std::uint64_t seed,
                   const NoiseModel& noise, const Json& extra = Json::object());

OfflineDataset read_dataset(const std::filesystem::path& records,
                            const std::filesystem::path& manifest);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ersft
