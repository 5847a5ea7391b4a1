#pragma once

#include <filesystem>
#include <string>

#include "painscope/features.hpp"

namespace painscope {

inline constexpr std::string_view kFeatureConfigFormat = "painscope-feature-config/1";

/// JSON form of a FeatureConfig. Band names are fixed; only their edges are
/// configurable. Keys left out of a file keep the preset's value.
std::string feature_config_json(const FeatureConfig& cfg, std::string_view preset = "epoch");
FeatureConfig parse_feature_config(std::string_view json_text);
FeatureConfig load_feature_config(const std::filesystem::path& path);

}  // namespace painscope
