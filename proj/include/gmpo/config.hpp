#pragma once

#include <filesystem>
#include <string>

#include "gmpo/trainer.hpp"

namespace gmpo {

// JSON experiment config, schema_version 1. Missing keys take the defaults
// baked into TrainConfig; unknown keys are rejected.
TrainConfig parse_config_json(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

// Serialized form is itself a valid input config (idempotent re-run).
std::string config_to_json(const TrainConfig& config);
void write_resolved_config(const TrainConfig& config,
                           const std::filesystem::path& path);

}  // namespace gmpo
