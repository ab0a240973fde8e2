#include "trocar_dock/planner.hpp"

#include <array>
#include <cmath>
#include <string>

#include "trocar_dock/errors.hpp"

namespace trocar_dock {

namespace {

constexpr std::array<std::pair<DockingPhase, std::string_view>, 7> kPhaseNames{{
    {DockingPhase::Orienting, "Orienting"},
    {DockingPhase::RayAligning, "RayAligning"},
    {DockingPhase::Approaching, "Approaching"},
    {DockingPhase::Inserting, "Inserting"},
    {DockingPhase::Holding, "Holding"},
    {DockingPhase::Done, "Done"},
    {DockingPhase::Failed, "Failed"},
}};

// Below this a remaining distance counts as reached.
constexpr double kArrived = 1e-9;

// Proportional step with a floor and ceiling on the rate, never passing the goal.
double limited_step(double error, double gain, double rate_min, double rate_max, double dt) {
  const double rate = std::clamp(gain * error, rate_min, rate_max);
  return std::min(rate * dt, error);
}

struct JointStep {
  Vec2 rot_next;
  bool landed = false;  // already at the goal, nothing left to rotate
};

Vec2 clamp_joints(const RobotModel& model, const Vec2& rot) {
  const double lim = model.limits.rotation_limit;
  return rot.cwiseMax(-lim).cwiseMin(lim);
}

// Rate-limited move of the rotary joints toward `joint_goal`.
JointStep rotate_toward(const RobotState& robot, const RobotModel& model, const Vec2& joint_goal,
                        const PlannerConfig& cfg, double dt) {
  const Vec2 goal = clamp_joints(model, joint_goal);
  const Vec2 now = robot.joint_values.tail<2>();
  JointStep js{now, (goal - now).cwiseAbs().maxCoeff() <= kArrived};
  if (js.landed) return js;
  for (int i = 0; i < 2; ++i) {
    const double e = goal(i) - now(i);
    js.rot_next(i) += std::copysign(
        limited_step(std::abs(e), cfg.orient_gain, cfg.min_angular_rate, cfg.max_angular_rate, dt), e);
  }
  return js;
}

// Joint rates reaching `rot_next` with the tip at `tip_next` after one step.
MotionCommand joint_command(const RobotState& robot, const RobotModel& model, const Vec2& rot_next,
                            const Vec3& tip_next, double dt) {
  MotionCommand cmd;
  cmd.angular = (rot_next - robot.joint_values.tail<2>()) / dt;
  cmd.linear = (model.translation_for_tip(rot_next, tip_next) - robot.joint_values.head<3>()) / dt;
  return cmd;
}

MotionCommand world_translation(const RobotModel& model, const Vec3& v_world) {
  MotionCommand cmd;
  cmd.linear = model.home.linear().transpose() * v_world;
  return cmd;
}

// World translation that brings the tip onto the line from the camera to
// `target`, keeping the camera-to-tip offset.
Vec3 onto_ray_correction(const Vec3& camera, const Vec3& tip, const Vec3& target) {
  const Vec3 u = tip - camera;
  const Vec3 d = target - camera;
  return d - (d.dot(u) / u.squaredNorm()) * u;
}

}  // namespace

std::string_view to_string(DockingPhase phase) {
  for (const auto& [p, name] : kPhaseNames)
    if (p == phase) return name;
  return "Unknown";
}

std::optional<DockingPhase> phase_from_string(std::string_view name) {
  for (const auto& [p, n] : kPhaseNames)
    if (n == name) return p;
  return std::nullopt;
}

bool is_active(DockingPhase phase) {
  return phase == DockingPhase::Orienting || phase == DockingPhase::RayAligning ||
         phase == DockingPhase::Approaching || phase == DockingPhase::Inserting;
}

bool is_legal_transition(DockingPhase from, DockingPhase to) {
  using P = DockingPhase;
  if (from == to) return from != P::Done && from != P::Failed;
  if (to == P::Failed) return is_active(from);
  if (to == P::Holding) return is_active(from);
  if (from == P::Holding) return is_active(to);
  switch (from) {
    case P::Orienting: return to == P::RayAligning;
    case P::RayAligning: return to == P::Approaching;
    case P::Approaching: return to == P::Inserting;
    case P::Inserting: return to == P::Done;
    default: return false;
  }
}

void PlannerConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("planner: ") + what);
  };
  require(orient_tolerance > 0 && ray_tolerance > 0 && success_lateral_tolerance > 0 && success_angle_tolerance > 0,
          "tolerances must be positive");
  require(v_min > 0 && v_min <= v_max, "need 0 < v_min <= v_max");
  require(approach_gain > 0 && orient_gain > 0 && align_gain > 0, "gains must be positive");
  require(min_angular_rate > 0 && min_angular_rate <= max_angular_rate, "need 0 < min_angular_rate <= max_angular_rate");
  require(insertion_depth > 0 && insertion_margin >= 0, "insertion_depth must be positive, margin non-negative");
  require(probe_angle >= 0 && max_probe_sweeps >= 0, "probe_angle and max_probe_sweeps must be non-negative");
  require(depth_hint > 0 && parallax_pixel_sigma > 0 && max_depth_sigma > 0 && ray_gate > 0,
          "depth estimation parameters must be positive");
}

double estimate_remaining_distance(const Vec3& tip, const Ray3& ray, double depth_hint) {
  const double along = (tip - ray.origin).dot(ray.direction);
  if (!(along > 0.0)) {
    throw ContractViolation("estimate_remaining_distance: tip is not in front of the ray origin");
  }
  return depth_hint - along;
}

double approach_speed(double remaining, const PlannerConfig& cfg) {
  return std::clamp(cfg.approach_gain * remaining, cfg.v_min, cfg.v_max);
}

StepOutput plan_step(const RobotState& robot, const RobotModel& model, const DetectionEstimate& det,
                     const std::optional<DockingTarget>& target, const PhaseState& phase,
                     const PlannerConfig& cfg, double dt) {
  using P = DockingPhase;
  if (!(dt > 0)) throw ContractViolation("plan_step: dt must be positive");
  if (phase.phase == P::Done || phase.phase == P::Failed) {
    throw ContractViolation("plan_step: called in terminal phase " + std::string(to_string(phase.phase)));
  }
  if (phase.phase == P::Holding && !is_active(phase.resume)) {
    throw ContractViolation("plan_step: Holding without an active phase to resume");
  }

  StepOutput out;
  out.state = phase;
  if (!det.valid) {
    if (phase.phase != P::Holding) out.state.resume = phase.phase;
    out.state.phase = P::Holding;
    return out;
  }
  const P current = phase.phase == P::Holding ? phase.resume : phase.phase;
  out.state.phase = current;
  if (!robot.within_workspace) {
    // The last command was clipped at a joint limit.
    out.state.phase = P::Failed;
    return out;
  }
  if (!target) return out;

  const Pose tip_pose = compose(robot.endeffector_pose, model.tool_offset);
  const Vec3 tip = tip_pose.translation();
  const Vec3 tool_axis = tip_pose.linear().col(2);
  const Vec3 camera = compose(robot.endeffector_pose, model.hand_eye).translation();
  // A depth-hint goal stays where it was when the approach began.
  const bool use_hint = (current == P::Approaching || current == P::Inserting) && !target->depth_from_parallax;
  const Vec3& goal = use_hint ? phase.hint_goal : target->tep_world;
  out.dist_to_ray = Ray3{camera, (goal - camera).normalized()}.distance_to(tip);

  switch (current) {
    case P::Orienting: {
      const double err = axis_angle_error<double>(tool_axis, target->trocar_axis).theta;
      if (err < cfg.orient_tolerance) {
        out.state.phase = P::RayAligning;
        out.state.axis_goal = target->trocar_axis;
        return out;
      }
      const JointStep js =
          rotate_toward(robot, model, model.rotation_joints_for_axis(target->trocar_axis), cfg, dt);
      // Pivot about the tip so the TEP stays in view.
      out.command = joint_command(robot, model, js.rot_next, tip, dt);
      return out;
    }
    case P::RayAligning: {
      // Finish the rotation toward the frozen axis while moving onto the ray.
      // Without a resolved depth, pivot the camera about the tip for parallax.
      const Vec2 aligned = clamp_joints(model, model.rotation_joints_for_axis(phase.axis_goal));
      JointStep js = rotate_toward(robot, model, phase.probing ? aligned + phase.probe_offset : aligned, cfg, dt);
      if (phase.probing && js.landed) {
        out.state.probing = false;
        ++out.state.probe_sweeps;
        js = rotate_toward(robot, model, aligned, cfg, dt);
      }
      if (!out.state.probing && js.landed && out.dist_to_ray < cfg.ray_tolerance) {
        if (!target->depth_from_parallax && phase.probe_sweeps < cfg.max_probe_sweeps && cfg.probe_angle > 0) {
          // Swing toward the middle of the joint range.
          out.state.probing = true;
          out.state.probe_offset = Vec2(aligned.x() > 0 ? -cfg.probe_angle : cfg.probe_angle, 0.0);
          out.state.probe_offset = clamp_joints(model, aligned + out.state.probe_offset) - aligned;
          return out;
        }
        out.state.phase = P::Approaching;
        out.state.hint_goal = goal;
        return out;
      }
      Vec3 tip_next = tip;
      const Vec3 delta = onto_ray_correction(camera, tip, goal);
      const double norm = delta.norm();
      if (norm > 0.0) tip_next += delta * (limited_step(norm, cfg.align_gain, cfg.v_min, cfg.v_max, dt) / norm);
      out.command = joint_command(robot, model, js.rot_next, tip_next, dt);
      return out;
    }
    case P::Approaching: {
      const Ray3 ray{camera, (goal - camera).normalized()};
      const double remaining = estimate_remaining_distance(tip, ray, (goal - camera).norm());
      out.remaining = remaining;
      if (remaining <= kArrived) {
        out.state.phase = P::Inserting;
        out.state.insertion_start = tip;
        return out;
      }
      out.speed_law = approach_speed(remaining, cfg);
      const double forward = std::min(out.speed_law * dt, remaining);
      Vec3 lateral = onto_ray_correction(camera, tip, goal);
      lateral -= lateral.dot(ray.direction) * ray.direction;
      const double lateral_norm = lateral.norm();
      if (lateral_norm > cfg.v_max * dt) lateral *= cfg.v_max * dt / lateral_norm;
      out.command = world_translation(model, (forward * ray.direction + lateral) / dt);
      return out;
    }
    case P::Inserting: {
      const double target_depth = cfg.insertion_depth + cfg.insertion_margin;
      const double inserted = (phase.insertion_start - tip).dot(tool_axis);
      const double remaining = target_depth - inserted;
      out.remaining = remaining;
      if (remaining <= kArrived) {
        out.state.phase = P::Done;
        return out;
      }
      const double step = std::min(cfg.v_max * dt, remaining);
      out.command = world_translation(model, -tool_axis * (step / dt));
      return out;
    }
    default:
      throw ContractViolation("plan_step: unexpected phase " + std::string(to_string(current)));
  }
}

SuccessMetrics check_success(const Pose& tip_pose, const Scene& scene, const PlannerConfig& cfg) {
  SuccessMetrics m;
  const Vec3 axis = scene.trocar_axis();
  const Vec3 shaft = tip_pose.linear().col(2);
  const Vec3 tip = tip_pose.translation();
  m.axis_angle = axis_angle_error<double>(axis, shaft).theta;

  const double cos_a = shaft.dot(axis);
  if (cos_a <= 1e-12) {
    // No crossing: fall back to the tip's own offset and depth.
    const Vec3 d = tip - scene.tep();
    m.lateral_offset = (d - d.dot(axis) * axis).norm();
    m.inserted_depth = -d.dot(axis);
    return m;
  }
  // Shaft line tip + s * shaft meets the TEP plane at s = (tep - tip).axis / cos_a.
  const double s = (scene.tep() - tip).dot(axis) / cos_a;
  const Vec3 crossing = tip + s * shaft;
  m.lateral_offset = (crossing - scene.tep()).norm();
  m.inserted_depth = s;
  m.success = m.axis_angle < cfg.success_angle_tolerance && m.lateral_offset < cfg.success_lateral_tolerance &&
              m.inserted_depth >= cfg.insertion_depth - 1e-9;
  return m;
}

void RayTriangulator::add(const Ray3& ray) {
  const Mat3 proj = Mat3::Identity() - ray.direction * ray.direction.transpose();
  normal_ += proj;
  rhs_ += proj * ray.origin;
  ++count_;
}

double RayTriangulator::min_eigenvalue() const {
  if (count_ == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Mat3>(normal_, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

std::optional<Vec3> RayTriangulator::solve() const {
  if (count_ < 2 || !(min_eigenvalue() > 1e-12 * static_cast<double>(count_))) return std::nullopt;
  return normal_.ldlt().solve(rhs_);
}

DockingController::DockingController(PlannerConfig cfg, RobotModel model, Intrinsics camera)
    : cfg_(cfg), model_(std::move(model)), camera_(camera) {
  cfg_.validate();
}

void DockingController::ingest(const RobotState& robot, const DetectionEstimate& det) {
  if (!det.valid) return;
  const Pose cam = compose(robot.endeffector_pose, model_.hand_eye);
  pixel_window_.push(det);
  DetectionEstimate world = det;
  world.z_axis = (cam.linear() * det.z_axis).normalized();
  axis_window_.push(world);
  camera_history_.emplace_back(det.tep.frame_index, cam);
  while (camera_history_.front().first < pixel_window_.entries().front().tep.frame_index) {
    camera_history_.pop_front();
  }
  if (!pixel_window_.full()) return;

  const TepEstimate filtered = temporal_filter_tep(pixel_window_);
  if ((det.tep.pixel() - filtered.pixel()).norm() > cfg_.ray_gate) return;
  const Ray3 local = backproject_ray(camera_, det.tep.pixel());
  triangulator_.add({cam.translation(), cam.linear() * local.direction});
}

std::optional<DockingTarget> DockingController::build_target() const {
  if (!pixel_window_.full() || !axis_window_.full()) return std::nullopt;
  const TepEstimate filtered = temporal_filter_tep(pixel_window_);
  const Pose* cam = nullptr;
  for (const auto& [frame, pose] : camera_history_) {
    if (frame == filtered.frame_index) cam = &pose;
  }
  if (cam == nullptr) throw ContractViolation("DockingController: no camera pose for filtered frame");

  DockingTarget target;
  target.trocar_axis = temporal_filter_orientation(axis_window_);
  const Ray3 local = backproject_ray(camera_, filtered.pixel());
  target.ray = {cam->translation(), cam->linear() * local.direction};

  target.tep_world = target.ray.at(cfg_.depth_hint);
  if (const auto point = triangulator_.solve()) {
    const double along = (*point - target.ray.origin).dot(target.ray.direction);
    const double angular_sigma = cfg_.parallax_pixel_sigma / camera_.fx;
    const double depth_sigma = angular_sigma * along / std::sqrt(triangulator_.min_eigenvalue());
    if (along > 0.0 && depth_sigma <= cfg_.max_depth_sigma) {
      target.tep_world = *point;
      target.depth_from_parallax = true;
    }
  }
  return target;
}

StepOutput DockingController::step(const RobotState& robot, const DetectionEstimate& det, double dt) {
  ingest(robot, det);
  if (det.valid) target_ = build_target();
  StepOutput out = plan_step(robot, model_, det, target_, state_, cfg_, dt);
  state_ = out.state;
  return out;
}

}  // namespace trocar_dock
