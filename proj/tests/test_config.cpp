#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "trocar_dock/config_io.hpp"
#include "trocar_dock/errors.hpp"

namespace trocar_dock {
namespace {

using nlohmann::json;

// Structural equality with a relative tolerance on numbers (degree keys go
// through a unit conversion).
void expect_json_near(const json& a, const json& b, const std::string& where = "") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    EXPECT_LE(std::abs(x - y), 1e-12 * std::max(1.0, std::abs(x))) << where;
    return;
  }
  ASSERT_EQ(a.type(), b.type()) << where;
  if (a.is_object()) {
    ASSERT_EQ(a.size(), b.size()) << where;
    for (const auto& [k, v] : a.items()) {
      ASSERT_TRUE(b.contains(k)) << where << "." << k;
      expect_json_near(v, b.at(k), where + "." + k);
    }
  } else if (a.is_array()) {
    ASSERT_EQ(a.size(), b.size()) << where;
    for (std::size_t i = 0; i < a.size(); ++i) expect_json_near(a[i], b[i], where + "[" + std::to_string(i) + "]");
  } else {
    EXPECT_EQ(a, b) << where;
  }
}

TEST(Config, DefaultsFromEmptyDocument) {
  const TrialConfig c = config_from_json(json::object());
  const TrialConfig d;
  EXPECT_EQ(c.frame_rate, d.frame_rate);
  EXPECT_EQ(c.planner.v_max, d.planner.v_max);
  EXPECT_EQ(c.scene.eye_radius, d.scene.eye_radius);
  EXPECT_TRUE(c.scene.hand_eye.matrix() == d.scene.hand_eye.matrix());
  EXPECT_TRUE(c.occlusions.empty());
}

TEST(Config, RoundTrip) {
  TrialConfig c;
  c.scene.eye_radius = 11.5;
  c.scene.hand_eye_error = make_transform<double>(Eigen::AngleAxisd(0.01, Vec3::UnitY()).toRotationMatrix(), Vec3(0.1, 0, 0));
  c.scene.camera.width = 640;
  c.scene.camera.cx = 320.0;
  c.scene.rng_seed = 77;
  c.robot.rotation_limit = deg_to_rad(25.0);
  c.start.require_reachable_target = false;
  c.noise.axis_tilt_std = 0.05;
  c.planner.max_probe_sweeps = 1;
  c.planner.orient_tolerance = deg_to_rad(0.3);
  c.max_sim_time = 60.0;
  c.occlusions = {{1.0, 2.0}, {3.5, 4.0}};

  const json j = config_to_json(c);
  const TrialConfig back = config_from_json(j);
  expect_json_near(j, config_to_json(back));
  EXPECT_EQ(back.scene.camera.width, 640);
  EXPECT_EQ(back.scene.rng_seed, 77u);
  EXPECT_FALSE(back.start.require_reachable_target);
  EXPECT_EQ(back.planner.max_probe_sweeps, 1);
  EXPECT_EQ(back.occlusions, c.occlusions);
  EXPECT_NEAR(back.robot.rotation_limit, c.robot.rotation_limit, 1e-15);
  EXPECT_LT((back.scene.hand_eye_error.matrix() - c.scene.hand_eye_error.matrix()).norm(), 1e-15);

  const auto dir = oracle::temp_dir("config");
  save_config(dir / "c.json", c);
  expect_json_near(j, config_to_json(load_config(dir / "c.json")));
}

TEST(Config, DegreeKeys) {
  const TrialConfig c = config_from_json(json::parse(R"({"planner": {"orient_tolerance_deg": 1.0}, "robot": {"rotation_limit_deg": 20}})"));
  EXPECT_NEAR(c.planner.orient_tolerance, deg_to_rad(1.0), 1e-15);
  EXPECT_NEAR(c.robot.rotation_limit, deg_to_rad(20.0), 1e-15);
}

TEST(Config, RejectsBadDocuments) {
  for (const char* text : {
           R"([1, 2])",
           R"({"scenery": {}})",
           R"({"scene": {"eye_radiuss": 12}})",
           R"({"scene": {"camera": {"fx": 1000, "skew": 0}}})",
           R"({"scene": 3})",
           R"({"planner": {"v_max": "fast"}})",
           R"({"planner": {"v_min": 2.0, "v_max": 1.0}})",
           R"({"scene": {"eye_center": [0, 0]}})",
           R"({"scene": {"hand_eye": {"rotation": [1,0,0,0,1,0,0,0,2], "translation": [0,0,0]}}})",
           R"({"scene": {"hand_eye": {"rotation": [1,0,0,0,1,0], "translation": [0,0,0]}}})",
           R"({"trial": {"occlusions": [[1.0]]}})",
           R"({"trial": {"frame_rate": 0}})",
           R"({"noise": {"tep_outlier_prob": 1.5}})",
       }) {
    EXPECT_THROW(config_from_json(json::parse(text)), ConfigError) << text;
  }
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    config_from_json(json::parse(R"({"noise": {"jitter": 1}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("noise.jitter"), std::string::npos) << e.what();
  }
}

TEST(Config, FileErrors) {
  const auto dir = oracle::temp_dir("config_files");
  try {
    load_config(dir / "absent.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("absent.json"), std::string::npos);
  }
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  std::ofstream(dir / "unknown.json") << R"({"robot": {"speed": 3}})";
  try {
    load_config(dir / "unknown.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown.json"), std::string::npos);
  }
}

TEST(Config, PoseJson) {
  const Pose p = make_transform<double>(Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix(), Vec3(1, -2, 3));
  const json j = pose_to_json(p);
  ASSERT_EQ(j.at("rotation").size(), 9u);
  EXPECT_EQ(j.at("rotation")[1].get<double>(), p.linear()(0, 1));  // row-major
  EXPECT_TRUE(pose_from_json(j, "p").matrix() == p.matrix());
  EXPECT_THROW(pose_from_json(json::parse(R"({"rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0], "x": 1})"), "p"),
               ConfigError);
}

}  // namespace
}  // namespace trocar_dock
