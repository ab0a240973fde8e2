#pragma once

// Trial configuration and its JSON form.
//
// One document with sections "scene", "robot", "start", "noise", "planner"
// and "trial". Every key is optional and falls back to the built-in
// default; unknown keys are rejected. Angles are given in degrees under
// keys ending in "_deg". Poses are {"rotation": [9 floats, row-major],
// "translation": [3 floats, mm]}.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trocar_dock/planner.hpp"
#include "trocar_dock/simworld.hpp"

namespace trocar_dock {

struct TrialConfig {
  SceneConfig scene{};
  RobotConfig robot{};
  InitialPoseBounds start{};
  NoiseModel noise{};
  PlannerConfig planner{};
  double frame_rate = 30.0;     // Hz
  double max_sim_time = 120.0;  // s
  // Simulated-time intervals [begin, end) during which every detection is dropped.
  std::vector<std::pair<double, double>> occlusions;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json config_to_json(const TrialConfig& cfg);
// Throws ConfigError on type errors, unknown keys or invalid values.
TrialConfig config_from_json(const nlohmann::json& j);

// Throws IoError (missing or unreadable file), ConfigError.
TrialConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrialConfig& cfg);

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace trocar_dock
