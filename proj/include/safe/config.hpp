#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "safe/trainer.hpp"

namespace safe {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full configuration with every constant spelled out by name.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// Overlays `j` onto the defaults. Unknown keys and wrongly typed values raise
/// ConfigError; so does a configuration failing RunConfig::validate().
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace safe
