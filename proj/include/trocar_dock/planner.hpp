#pragma once

// Docking state machine: orient the instrument with the trocar axis, put
// the tip on the camera-TEP viewing ray, slide along that ray to the entry
// point, then insert along the instrument axis. Lost detections hold the
// robot still until the trocar is seen again.

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <utility>

#include "trocar_dock/geometry.hpp"
#include "trocar_dock/perception.hpp"
#include "trocar_dock/simworld.hpp"

namespace trocar_dock {

enum class DockingPhase { Orienting, RayAligning, Approaching, Inserting, Holding, Done, Failed };

std::string_view to_string(DockingPhase phase);
std::optional<DockingPhase> phase_from_string(std::string_view name);
bool is_active(DockingPhase phase);
bool is_legal_transition(DockingPhase from, DockingPhase to);

struct PlannerConfig {
  double orient_tolerance = deg_to_rad(0.5);   // rad
  double ray_tolerance = 0.02;                 // mm, tip to camera-TEP ray
  double approach_gain = 0.5;                  // 1/s
  double v_max = 1.0;                          // mm/s
  double v_min = 0.1;                          // mm/s
  double insertion_depth = 2.0;                // mm past the TEP plane
  double insertion_margin = 0.5;               // extra advance covering depth-estimate error
  double success_lateral_tolerance = 0.31;     // lumen radius - tip radius, mm
  double success_angle_tolerance = deg_to_rad(10.0);
  double orient_gain = 1.0;                    // 1/s, rotary joints
  double max_angular_rate = 0.1;               // rad/s
  double min_angular_rate = 0.01;              // rad/s
  double align_gain = 1.0;                     // 1/s, lateral corrections
  double depth_hint = 35.0;                    // mm, camera to TEP before parallax is available
  double parallax_pixel_sigma = 3.0;           // px, assumed per-frame detection noise
  double max_depth_sigma = 0.25;               // mm, accept the parallax depth below this
  double ray_gate = 20.0;                      // px, raw detections farther from the filtered TEP are not triangulated
  double probe_angle = deg_to_rad(10.0);       // rad, pivot swing when the depth is unresolved
  int max_probe_sweeps = 3;

  void validate() const;
};

struct PhaseState {
  DockingPhase phase = DockingPhase::Orienting;
  DockingPhase resume = DockingPhase::Orienting;  // phase to return to after Holding
  Vec3 axis_goal = Vec3::UnitZ();  // filtered axis frozen when Orienting ends
  bool probing = false;            // RayAligning parallax sweep under way
  int probe_sweeps = 0;
  Vec2 probe_offset = Vec2::Zero();
  Vec3 hint_goal = Vec3::Zero();   // entry point when Approaching began
  Vec3 insertion_start = Vec3::Zero();
};

/// Target in the world frame, as believed by the controller. The entry point
/// is the ray intersection once its depth is well conditioned, otherwise the
/// filtered pixel's ray at the configured depth hint.
struct DockingTarget {
  Vec3 tep_world = Vec3::Zero();
  Vec3 trocar_axis = Vec3::UnitZ();
  Ray3 ray;                      // viewing ray through the filtered TEP pixel
  bool depth_from_parallax = false;  // tep_world is the ray intersection
};

struct StepOutput {
  MotionCommand command;
  PhaseState state;
  double dist_to_ray = -1.0;     // mm; negative when undefined
  double speed_law = 0.0;        // forward speed from the adaptive law, mm/s
  double remaining = -1.0;       // mm; negative when undefined
};

/// Distance along `ray` from the tip's foot point to the point at depth
/// `depth_hint`. Throws ContractViolation if the tip is behind the ray origin.
double estimate_remaining_distance(const Vec3& tip, const Ray3& ray, double depth_hint);

/// clamp(gain * remaining, v_min, v_max)
double approach_speed(double remaining, const PlannerConfig& cfg);

/// One control step. `target` is empty while the filter windows are filling.
StepOutput plan_step(const RobotState& robot, const RobotModel& model, const DetectionEstimate& det,
                     const std::optional<DockingTarget>& target, const PhaseState& phase,
                     const PlannerConfig& cfg, double dt);

struct SuccessMetrics {
  bool success = false;
  double lateral_offset = 0.0;  // mm, shaft crossing of the TEP plane vs trocar axis
  double axis_angle = 0.0;      // rad
  double inserted_depth = 0.0;  // mm of shaft past the TEP plane
};

SuccessMetrics check_success(const Pose& tip_pose, const Scene& scene, const PlannerConfig& cfg);

/// Least-squares intersection of viewing rays.
class RayTriangulator {
 public:
  void add(const Ray3& ray);
  std::size_t count() const { return count_; }
  double min_eigenvalue() const;
  std::optional<Vec3> solve() const;

 private:
  Mat3 normal_ = Mat3::Zero();
  Vec3 rhs_ = Vec3::Zero();
  std::size_t count_ = 0;
};

/// Streams detections through the temporal filters and the planner.
class DockingController {
 public:
  DockingController(PlannerConfig cfg, RobotModel model, Intrinsics camera);

  StepOutput step(const RobotState& robot, const DetectionEstimate& det, double dt);

  const PhaseState& state() const { return state_; }
  const std::optional<DockingTarget>& target() const { return target_; }
  const PlannerConfig& config() const { return cfg_; }

 private:
  void ingest(const RobotState& robot, const DetectionEstimate& det);
  std::optional<DockingTarget> build_target() const;

  PlannerConfig cfg_;
  RobotModel model_;
  Intrinsics camera_;
  FilterWindow pixel_window_;
  FilterWindow axis_window_;  // axes rotated into the world frame
  std::deque<std::pair<std::int64_t, Pose>> camera_history_;
  RayTriangulator triangulator_;
  PhaseState state_;
  std::optional<DockingTarget> target_;
};

}  // namespace trocar_dock
