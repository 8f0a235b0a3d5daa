#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lau/train.hpp"

namespace lau {

/// Applies the keys of a JSON object on top of the defaults. Unknown keys,
/// wrongly typed values and invalid settings raise ConfigError naming the
/// field.
TrainConfig parse_config(const nlohmann::json& j);
TrainConfig parse_config(const nlohmann::json& j, TrainConfig base);
TrainConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const TrainConfig& config);

}  // namespace lau
