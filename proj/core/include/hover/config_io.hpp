#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hover/env.hpp"
#include "hover/ppo.hpp"

namespace hover::config {

using Json = nlohmann::ordered_json;

// Angles are stored in degrees under *_deg keys; everything else is SI.

Json to_json(const env::EpisodeConfig& cfg);
Json to_json(const ppo::PPOConfig& cfg);
Json to_json(const ppo::TrainConfig& cfg);

/// Keys absent from `j` keep the value from `base`; unknown keys throw ConfigError.
env::EpisodeConfig episode_from_json(const Json& j, const env::EpisodeConfig& base = {});
ppo::PPOConfig ppo_from_json(const Json& j, const ppo::PPOConfig& base = {});
ppo::TrainConfig train_from_json(const Json& j, const ppo::TrainConfig& base = {});

/// Applies "dotted.key=value" assignments in order. The value is parsed as
/// JSON when possible, otherwise taken as a string. Unknown keys throw.
void apply_overrides(Json& j, const std::vector<std::string>& assignments);

/// Built-in configurations: "base" (full problem) and "curriculum" (reduced
/// problem: spherical non-precessing bodies, slow spin, 100-200 m, 300 s).
ppo::TrainConfig named_train_config(const std::string& name);
std::vector<std::string> named_train_configs();

/// `spec` is a built-in name or a path to a JSON file layered over "base".
ppo::TrainConfig resolve_train_config(const std::string& spec,
                                      const std::vector<std::string>& overrides = {});

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace hover::config
