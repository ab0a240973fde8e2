#pragma once

// Randomized eye/trocar scenes, the 5-DoF camera-in-hand robot, ground-truth
// confidence maps, a calibrated stand-in for the learned detector, and
// dataset export.
//
// World units are millimetres and radians. The trocar frame's +Z is the
// insertion axis pointing out of the eye; the tool frame's +Z points from
// the tip back along the shaft, so an aligned instrument has the same +Z as
// the trocar and inserts by moving along -Z.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trocar_dock/geometry.hpp"
#include "trocar_dock/perception.hpp"
#include "trocar_dock/rng.hpp"

namespace trocar_dock {

Pose default_hand_eye();
Pose default_tool_offset();

struct SceneConfig {
  double eye_radius = 12.0;
  double limbus_radius = 6.0;
  double trocar_offset_arc = 3.5;  // along the sclera, posterior to the limbus
  double trocar_outer_radius = 0.45;
  double trocar_lumen_radius = 0.33;
  double trocar_length = 4.0;
  double instrument_tip_radius = 0.02;
  double trocar_tilt_cone = deg_to_rad(10.0);  // max trocar-axis tilt from the surface normal
  double gaze_cone = deg_to_rad(10.0);         // max eye-axis deviation from world +Z
  double eye_hidden_fraction = 0.2;
  Vec3 eye_center = Vec3::Zero();
  Intrinsics camera{};
  Pose hand_eye = default_hand_eye();        // camera in endeffector frame
  Pose hand_eye_error = Pose::Identity();    // applied after hand_eye on the true chain
  Pose tool_offset = default_tool_offset();  // tool tip in endeffector frame
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct Scene {
  Pose trocar_pose = Pose::Identity();  // world frame; translation is the TEP
  Vec3 eye_center = Vec3::Zero();
  Vec3 surface_normal = Vec3::UnitZ();  // outward eye normal at the TEP
  bool eye_rendered = true;

  Vec3 tep() const { return trocar_pose.translation(); }
  Vec3 trocar_axis() const { return trocar_pose.linear().col(2); }
};

/// Random scene: TEP on the eye sphere at the configured arc behind the
/// limbus, trocar axis tilted inside the cone, random roll, eye hidden in a
/// fixed fraction of samples.
Scene sample_scene(const SceneConfig& cfg, CounterRng& rng);

// --- robot -------------------------------------------------------------------

struct RobotConfig {
  double translation_limit = 15.0;                // +/- mm per prismatic joint about home
  double rotation_limit = deg_to_rad(30.0);       // +/- rad per rotary joint about home
  double max_linear_speed = 5.0;                  // mm/s per prismatic joint
  double max_angular_speed = 0.5;                 // rad/s per rotary joint
  double home_standoff = 8.5;                     // tip height above the TEP at home, mm

  void validate() const;
};

using JointVector = Eigen::Matrix<double, 5, 1>;  // x, y, z (mm), rot_x, rot_y (rad)

/// Velocity command. Linear part is in the robot base frame (the frame of
/// the prismatic axes); angular part drives the two rotary joints.
struct MotionCommand {
  Vec3 linear = Vec3::Zero();
  Vec2 angular = Vec2::Zero();

  static MotionCommand zero() { return {}; }
  bool is_zero() const { return linear.isZero(0.0) && angular.isZero(0.0); }
};

struct RobotModel {
  Pose home = Pose::Identity();  // base frame in world
  RobotConfig limits{};
  Pose tool_offset = default_tool_offset();
  Pose hand_eye = default_hand_eye();
  Pose hand_eye_error = Pose::Identity();

  Pose endeffector_pose(const JointVector& q) const;

  // Rotary joint values that point the tool +Z along `axis_world`.
  Vec2 rotation_joints_for_axis(const Vec3& axis_world) const;
  // Prismatic joint values that place the tip at `tip_world` given rotary joints.
  Vec3 translation_for_tip(const Vec2& rot, const Vec3& tip_world) const;
  bool within_limits(const JointVector& q) const;
};

struct RobotState {
  Pose endeffector_pose = Pose::Identity();
  JointVector joint_values = JointVector::Zero();
  bool within_workspace = true;
};

/// Home frame: +Z along the scene's surface normal, tip `home_standoff` above the TEP.
RobotModel make_robot_model(const Scene& scene, const SceneConfig& scene_cfg,
                            const RobotConfig& robot_cfg);

RobotState make_robot_state(const RobotModel& model, const JointVector& q);

/// Integrates one step with per-joint velocity clamping and workspace clamping.
RobotState robot_apply(const RobotState& state, const MotionCommand& cmd, double dt,
                       const RobotModel& model);

Pose tool_tip_pose(const RobotState& state, const SceneConfig& cfg);
/// True camera: endeffector * hand_eye * hand_eye_error.
Pose camera_pose(const RobotState& state, const SceneConfig& cfg);
/// Camera as believed by the controller (no calibration error).
Pose nominal_camera_pose(const RobotState& state, const SceneConfig& cfg);

struct InitialPoseBounds {
  double distance_min = 5.0;  // tip to TEP, mm
  double distance_max = 12.0;
  double approach_cone = deg_to_rad(35.0);   // tip direction from the TEP vs trocar axis
  double misalignment_max = deg_to_rad(30.0);  // tool axis vs trocar axis
  double image_margin = 20.0;                // px the TEP must keep from the border
  bool require_reachable_target = true;      // aligned tip at TEP - reach_depth * axis inside limits
  double reach_depth = 3.0;                  // mm past the TEP
  int max_attempts = 20000;

  void validate() const;
};

/// Random reachable start near the trocar with the TEP in view, both at the
/// start and once the tool is aligned about the fixed tip.
RobotState sample_initial_state(const Scene& scene, const SceneConfig& scene_cfg,
                                const RobotModel& model, const InitialPoseBounds& bounds,
                                CounterRng& rng);

// --- perception stand-ins ----------------------------------------------------

struct RenderedMap {
  ConfidenceMap map;
  Vec2 projected_tep;     // exact projection, sub-pixel
  PixelCoord tep_pixel;   // rounded; the map's peak
};

inline constexpr double kHeatmapSigma = 1.0;
inline constexpr double kHeatmapRadius = 15.0;

/// Gaussian bump exp(-d^2 / 2) within 15 px of the rounded TEP projection.
RenderedMap render_confidence_map(const Scene& scene, const Pose& camera, const Intrinsics& k);

struct NoiseModel {
  double tep_jitter_std = 2.25;      // px, per image axis
  double tep_outlier_prob = 0.01;
  double tep_outlier_range = 50.0;   // px, radius of the uniform outlier disc
  double axis_tilt_std = 0.136;      // rad; tilt magnitude is |N(0, std)|
  double detection_dropout_prob = 0.02;

  static NoiseModel none() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
  void validate() const;
};

/// Noisy detection of the scene's trocar from `camera`. Always consumes the
/// same number of draws from `rng`.
DetectionEstimate simulate_detection(const Scene& scene, const Pose& camera, const Intrinsics& k,
                                     const NoiseModel& noise, CounterRng& rng,
                                     std::int64_t frame_index);

/// Trocar axis and TEP pixel as seen by `camera`, noise free.
struct TrueView {
  Vec2 tep_px;
  Vec3 axis_cam;
  bool in_front = false;
};
TrueView true_view(const Scene& scene, const Pose& camera, const Intrinsics& k);

// --- dataset -----------------------------------------------------------------

struct DatasetRecord {
  std::int64_t frame = 0;
  std::string pfm_path;  // relative to the dataset root
  Vec2 tep_px = Vec2::Zero();
  Rot6 r6d;              // trocar orientation in the camera frame
  Pose cam_pose = Pose::Identity();
  bool eye_rendered = true;
};

/// Writes maps/frame_NNNNNN.pfm and labels.jsonl under `out_dir`.
std::vector<DatasetRecord> export_dataset(const SceneConfig& scene_cfg, const RobotConfig& robot_cfg,
                                          const InitialPoseBounds& bounds, std::int64_t n_frames,
                                          const std::filesystem::path& out_dir, std::uint64_t seed);

inline constexpr const char* kLabelsFile = "labels.jsonl";

std::vector<DatasetRecord> read_labels(const std::filesystem::path& labels_path);

}  // namespace trocar_dock
