#pragma once

#include <string>

#include "listreader/training.hpp"

namespace listreader {

// JSON config with sections model / training / data / ablation. Every key is
// optional and defaulted; unknown keys or sections are rejected.
struct AppConfig {
  TrainConfig training;  // also carries the model dims and the ablation name
};

AppConfig config_from_json(const std::string& text);
AppConfig load_config(const std::string& path);

// The effective configuration (defaults applied), suitable for the run log
// and for feeding back into config_from_json.
std::string config_to_json(const AppConfig& cfg);

}  // namespace listreader
