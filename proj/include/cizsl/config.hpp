#pragma once

// TrainConfig <-> JSON. Every field has a key; unknown keys are rejected.
// Overrides use dotted paths such as "loss.lambda_creativity=0.5".

#include <string>
#include <vector>

#include <json.hpp>

#include "cizsl/dataio.hpp"
#include "cizsl/training.hpp"

namespace cizsl {

nlohmann::json to_json(const TrainConfig& cfg);
/// Fields absent from `j` keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

/// Sets `path` (dot separated) in `j` to `value`, parsed as JSON when
/// possible and as a string otherwise. The path must already exist.
void apply_override(nlohmann::json& j, const std::string& path, const std::string& value);
/// "key=value" form.
void apply_override(nlohmann::json& j, const std::string& assignment);

TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace cizsl
