#include "trocar_dock/simworld.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "trocar_dock/errors.hpp"
#include "trocar_dock/pfm.hpp"

namespace trocar_dock {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Uniform direction on the spherical cap of half-angle `cone` about `axis`.
Vec3 sample_cap(const Vec3& axis, double cone, CounterRng& rng) {
  const double cos_t = 1.0 - rng.uniform() * (1.0 - std::cos(cone));
  const double psi = kTwoPi * rng.uniform();
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const Mat3 frame = frame_from_z(axis);
  return (cos_t * frame.col(2) + sin_t * (std::cos(psi) * frame.col(0) + std::sin(psi) * frame.col(1)))
      .normalized();
}

Mat3 joint_rotation(double rot_x, double rot_y) {
  return (Eigen::AngleAxisd(rot_x, Vec3::UnitX()) * Eigen::AngleAxisd(rot_y, Vec3::UnitY()))
      .toRotationMatrix();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool visible(const Scene& scene, const Pose& camera, const Intrinsics& k, double margin) {
  const TrueView view = true_view(scene, camera, k);
  if (!view.in_front) return false;
  return view.tep_px.x() >= margin && view.tep_px.x() < k.width - margin && view.tep_px.y() >= margin &&
         view.tep_px.y() < k.height - margin;
}

}  // namespace

Pose default_hand_eye() {
  // 3 mm beside the shaft, 25 mm behind the tip, looking 10 mm past the tip.
  return look_at<double>(Vec3(0.0, 3.0, 10.0), Vec3(0.0, 0.0, -25.0), Vec3::UnitX());
}

Pose default_tool_offset() {
  Pose p = Pose::Identity();
  p.translation() = Vec3(0.0, 0.0, -15.0);
  return p;
}

void SceneConfig::validate() const {
  require(eye_radius > 0 && limbus_radius > 0 && trocar_offset_arc > 0, "scene: radii and arc must be positive");
  require(limbus_radius < eye_radius, "scene: limbus_radius must be smaller than eye_radius");
  require(trocar_outer_radius > 0 && trocar_lumen_radius > 0 && trocar_length > 0 && instrument_tip_radius > 0,
          "scene: trocar and instrument dimensions must be positive");
  require(trocar_lumen_radius < trocar_outer_radius, "scene: trocar_lumen_radius must be below trocar_outer_radius");
  require(instrument_tip_radius < trocar_lumen_radius, "scene: instrument_tip_radius must be below trocar_lumen_radius");
  require(std::asin(limbus_radius / eye_radius) + trocar_offset_arc / eye_radius < std::numbers::pi,
          "scene: trocar offset wraps past the posterior pole");
  require(trocar_tilt_cone >= 0 && trocar_tilt_cone < std::numbers::pi / 2, "scene: trocar_tilt_cone must be in [0, 90) deg");
  require(gaze_cone >= 0 && gaze_cone <= std::numbers::pi, "scene: gaze_cone must be in [0, 180] deg");
  require(eye_hidden_fraction >= 0 && eye_hidden_fraction <= 1, "scene: eye_hidden_fraction must be in [0, 1]");
  require(camera.valid(), "scene: invalid camera intrinsics");
  require(is_rotation<double>(hand_eye.linear()) && is_rotation<double>(hand_eye_error.linear()),
          "scene: hand_eye rotations must be orthonormal");
  require(tool_offset.linear().isIdentity(1e-12), "scene: tool_offset must be a pure translation");
}

Scene sample_scene(const SceneConfig& cfg, CounterRng& rng) {
  cfg.validate();
  const Vec3 eye_axis = sample_cap(Vec3::UnitZ(), cfg.gaze_cone, rng);
  const double polar = std::asin(cfg.limbus_radius / cfg.eye_radius) + cfg.trocar_offset_arc / cfg.eye_radius;
  const double azimuth = kTwoPi * rng.uniform();
  const Mat3 eye_frame = frame_from_z(eye_axis);
  const Vec3 normal = (std::cos(polar) * eye_frame.col(2) +
                       std::sin(polar) * (std::cos(azimuth) * eye_frame.col(0) + std::sin(azimuth) * eye_frame.col(1)))
                          .normalized();
  const Vec3 axis = sample_cap(normal, cfg.trocar_tilt_cone, rng);
  const double roll = kTwoPi * rng.uniform();
  const bool hidden = rng.uniform() < cfg.eye_hidden_fraction;

  Scene scene;
  scene.eye_center = cfg.eye_center;
  scene.surface_normal = normal;
  scene.trocar_pose = make_transform<double>(
      frame_from_z(axis) * Eigen::AngleAxisd(roll, Vec3::UnitZ()).toRotationMatrix(),
      cfg.eye_center + cfg.eye_radius * normal);
  scene.eye_rendered = !hidden;
  return scene;
}

// --- robot -------------------------------------------------------------------

void RobotConfig::validate() const {
  require(translation_limit > 0 && rotation_limit > 0 && rotation_limit < std::numbers::pi / 2,
          "robot: limits must be positive (rotation below 90 deg)");
  require(max_linear_speed > 0 && max_angular_speed > 0, "robot: speed limits must be positive");
  require(home_standoff >= 0, "robot: home_standoff must be non-negative");
}

Pose RobotModel::endeffector_pose(const JointVector& q) const {
  Pose joints = Pose::Identity();
  joints.translation() = q.head<3>();
  joints.linear() = joint_rotation(q(3), q(4));
  return home * joints;
}

Vec2 RobotModel::rotation_joints_for_axis(const Vec3& axis_world) const {
  const Vec3 a = home.linear().transpose() * normalize(axis_world);
  return {std::atan2(-a.y(), a.z()), std::asin(std::clamp(a.x(), -1.0, 1.0))};
}

Vec3 RobotModel::translation_for_tip(const Vec2& rot, const Vec3& tip_world) const {
  return home.inverse(Eigen::Isometry) * tip_world - joint_rotation(rot(0), rot(1)) * tool_offset.translation();
}

bool RobotModel::within_limits(const JointVector& q) const {
  return q.head<3>().cwiseAbs().maxCoeff() <= limits.translation_limit &&
         q.tail<2>().cwiseAbs().maxCoeff() <= limits.rotation_limit;
}

RobotModel make_robot_model(const Scene& scene, const SceneConfig& scene_cfg, const RobotConfig& robot_cfg) {
  scene_cfg.validate();
  robot_cfg.validate();
  RobotModel model;
  model.limits = robot_cfg;
  model.tool_offset = scene_cfg.tool_offset;
  model.hand_eye = scene_cfg.hand_eye;
  model.hand_eye_error = scene_cfg.hand_eye_error;
  const Pose tip_home = make_transform<double>(frame_from_z(scene.surface_normal),
                                               scene.tep() + robot_cfg.home_standoff * scene.surface_normal);
  model.home = tip_home * invert(scene_cfg.tool_offset);
  return model;
}

RobotState make_robot_state(const RobotModel& model, const JointVector& q) {
  RobotState s;
  s.joint_values = q;
  s.endeffector_pose = model.endeffector_pose(q);
  s.within_workspace = model.within_limits(q);
  return s;
}

RobotState robot_apply(const RobotState& state, const MotionCommand& cmd, double dt, const RobotModel& model) {
  if (!(dt >= 0)) throw PreconditionError("robot_apply: dt must be non-negative");
  const auto& lim = model.limits;
  JointVector rate;
  rate.head<3>() = cmd.linear.cwiseMax(-lim.max_linear_speed).cwiseMin(lim.max_linear_speed);
  rate.tail<2>() = cmd.angular.cwiseMax(-lim.max_angular_speed).cwiseMin(lim.max_angular_speed);

  JointVector q = state.joint_values + rate * dt;
  bool clamped = false;
  for (int i = 0; i < 5; ++i) {
    const double bound = i < 3 ? lim.translation_limit : lim.rotation_limit;
    if (q(i) > bound) {
      q(i) = bound;
      clamped = true;
    } else if (q(i) < -bound) {
      q(i) = -bound;
      clamped = true;
    }
  }
  RobotState out;
  out.joint_values = q;
  out.endeffector_pose = model.endeffector_pose(q);
  out.within_workspace = !clamped;
  return out;
}

Pose tool_tip_pose(const RobotState& state, const SceneConfig& cfg) {
  return compose(state.endeffector_pose, cfg.tool_offset);
}

Pose camera_pose(const RobotState& state, const SceneConfig& cfg) {
  return compose(compose(state.endeffector_pose, cfg.hand_eye), cfg.hand_eye_error);
}

Pose nominal_camera_pose(const RobotState& state, const SceneConfig& cfg) {
  return compose(state.endeffector_pose, cfg.hand_eye);
}

void InitialPoseBounds::validate() const {
  require(distance_min > 0 && distance_max >= distance_min, "start: need 0 < distance_min <= distance_max");
  require(approach_cone >= 0 && approach_cone < std::numbers::pi / 2, "start: approach_cone must be in [0, 90) deg");
  require(misalignment_max >= 0 && misalignment_max < std::numbers::pi / 2,
          "start: misalignment_max must be in [0, 90) deg");
  require(image_margin >= 0, "start: image_margin must be non-negative");
  require(max_attempts > 0, "start: max_attempts must be positive");
  require(reach_depth >= 0, "start: reach_depth must be non-negative");
}

RobotState sample_initial_state(const Scene& scene, const SceneConfig& scene_cfg, const RobotModel& model,
                                const InitialPoseBounds& bounds, CounterRng& rng) {
  bounds.validate();
  const Vec3 axis = scene.trocar_axis();
  const Vec2 aligned_rot = model.rotation_joints_for_axis(axis);
  for (int attempt = 0; attempt < bounds.max_attempts; ++attempt) {
    const Vec3 tool_axis = sample_cap(axis, bounds.misalignment_max, rng);
    const Vec3 direction = sample_cap(axis, bounds.approach_cone, rng);
    const double distance = rng.uniform(bounds.distance_min, bounds.distance_max);
    const Vec3 tip = scene.tep() + distance * direction;

    JointVector q;
    q.tail<2>() = model.rotation_joints_for_axis(tool_axis);
    q.head<3>() = model.translation_for_tip(q.tail<2>(), tip);
    if (!model.within_limits(q)) continue;
    const RobotState start = make_robot_state(model, q);
    if (!visible(scene, camera_pose(start, scene_cfg), scene_cfg.camera, bounds.image_margin)) continue;

    JointVector aligned;
    aligned.tail<2>() = aligned_rot;
    aligned.head<3>() = model.translation_for_tip(aligned_rot, tip);
    if (!model.within_limits(aligned)) continue;
    if (!visible(scene, camera_pose(make_robot_state(model, aligned), scene_cfg), scene_cfg.camera,
                 bounds.image_margin)) {
      continue;
    }
    if (bounds.require_reachable_target) {
      JointVector dock;
      dock.tail<2>() = aligned_rot;
      dock.head<3>() = model.translation_for_tip(aligned_rot, scene.tep() - bounds.reach_depth * axis);
      if (!model.within_limits(dock)) continue;
    }
    return start;
  }
  throw ConfigError("sample_initial_state: no admissible start pose after " + std::to_string(bounds.max_attempts) +
                    " attempts");
}

// --- perception stand-ins ----------------------------------------------------

TrueView true_view(const Scene& scene, const Pose& camera, const Intrinsics& k) {
  TrueView view;
  const Pose cam_inv = invert(camera);
  const Vec3 p = cam_inv * scene.tep();
  view.axis_cam = cam_inv.linear() * scene.trocar_axis();
  view.in_front = p.z() > 0;
  if (view.in_front) view.tep_px = project(k, p);
  return view;
}

RenderedMap render_confidence_map(const Scene& scene, const Pose& camera, const Intrinsics& k) {
  const Vec3 p = invert(camera) * scene.tep();
  const Vec2 px = project(k, p);
  const PixelCoord center{static_cast<int>(std::floor(px.x() + 0.5)), static_cast<int>(std::floor(px.y() + 0.5))};
  if (center.x < 0 || center.x >= k.width || center.y < 0 || center.y >= k.height) {
    throw OutOfBounds("render_confidence_map: TEP projects outside the frame");
  }
  ConfidenceMap map(k.width, k.height);
  const int r = static_cast<int>(kHeatmapRadius);
  const double two_sigma_sq = 2.0 * kHeatmapSigma * kHeatmapSigma;
  for (int dy = -r; dy <= r; ++dy) {
    const int y = center.y + dy;
    if (y < 0 || y >= k.height) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int x = center.x + dx;
      if (x < 0 || x >= k.width) continue;
      const double d2 = static_cast<double>(dx * dx + dy * dy);
      if (d2 > kHeatmapRadius * kHeatmapRadius) continue;
      map.at(x, y) = static_cast<float>(std::exp(-d2 / two_sigma_sq));
    }
  }
  return {std::move(map), px, center};
}

void NoiseModel::validate() const {
  require(tep_jitter_std >= 0 && tep_outlier_range >= 0 && axis_tilt_std >= 0, "noise: standard deviations must be >= 0");
  for (double p : {tep_outlier_prob, detection_dropout_prob}) {
    require(p >= 0 && p <= 1, "noise: probabilities must be in [0, 1]");
  }
}

DetectionEstimate simulate_detection(const Scene& scene, const Pose& camera, const Intrinsics& k,
                                     const NoiseModel& noise, CounterRng& rng, std::int64_t frame_index) {
  const bool dropped = rng.uniform() < noise.detection_dropout_prob;
  const bool outlier = rng.uniform() < noise.tep_outlier_prob;
  const double jitter_u = rng.normal();
  const double jitter_v = rng.normal();
  const double outlier_r = noise.tep_outlier_range * std::sqrt(rng.uniform());
  const double outlier_a = kTwoPi * rng.uniform();
  const double tilt = std::abs(noise.axis_tilt_std * rng.normal());
  const double tilt_dir = kTwoPi * rng.uniform();

  DetectionEstimate det;
  det.tep.frame_index = frame_index;
  const TrueView view = true_view(scene, camera, k);
  if (!view.in_front) return det;

  Vec2 px = view.tep_px;
  if (outlier) {
    px += outlier_r * Vec2(std::cos(outlier_a), std::sin(outlier_a));
  } else {
    px += noise.tep_jitter_std * Vec2(jitter_u, jitter_v);
  }
  det.tep.u = px.x();
  det.tep.v = px.y();

  const Vec3 c = view.axis_cam.normalized();
  if (tilt > 0.0) {
    const Vec3 e1 = any_orthogonal(c);
    const Vec3 e2 = c.cross(e1);
    const Vec3 k_axis = std::cos(tilt_dir) * e1 + std::sin(tilt_dir) * e2;
    det.z_axis = (std::cos(tilt) * c + std::sin(tilt) * k_axis.cross(c)).normalized();
  } else {
    det.z_axis = c;
  }
  det.valid = !dropped && k.contains(view.tep_px) && k.contains(px);
  det.tep.confidence = det.valid ? 1.0 : 0.0;
  return det;
}

// --- dataset -----------------------------------------------------------------

namespace {

nlohmann::json record_to_json(const DatasetRecord& r) {
  nlohmann::json pose = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pose.push_back(r.cam_pose.linear()(i, j));
  for (int i = 0; i < 3; ++i) pose.push_back(r.cam_pose.translation()(i));
  nlohmann::json r6 = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) r6.push_back(r.r6d.coeffs(i));
  return {{"frame", r.frame},
          {"pfm_path", r.pfm_path},
          {"tep_px", {r.tep_px.x(), r.tep_px.y()}},
          {"r6d", r6},
          {"cam_pose", pose},
          {"eye_rendered", r.eye_rendered}};
}

DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.frame = j.at("frame").get<std::int64_t>();
  r.pfm_path = j.at("pfm_path").get<std::string>();
  const auto& tep = j.at("tep_px");
  if (tep.size() != 2) throw FormatError("tep_px must have 2 entries");
  r.tep_px = Vec2(tep[0].get<double>(), tep[1].get<double>());
  const auto& r6 = j.at("r6d");
  if (r6.size() != 6) throw FormatError("r6d must have 6 entries");
  for (int i = 0; i < 6; ++i) r.r6d.coeffs(i) = r6[static_cast<std::size_t>(i)].get<double>();
  const auto& pose = j.at("cam_pose");
  if (pose.size() != 12) throw FormatError("cam_pose must have 12 entries");
  Mat3 rot;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) rot(i, k) = pose[static_cast<std::size_t>(3 * i + k)].get<double>();
  r.cam_pose = make_transform<double>(
      rot, Vec3(pose[9].get<double>(), pose[10].get<double>(), pose[11].get<double>()));
  r.eye_rendered = j.at("eye_rendered").get<bool>();
  return r;
}

}  // namespace

std::vector<DatasetRecord> export_dataset(const SceneConfig& scene_cfg, const RobotConfig& robot_cfg,
                                          const InitialPoseBounds& bounds, std::int64_t n_frames,
                                          const std::filesystem::path& out_dir, std::uint64_t seed) {
  if (n_frames < 0) throw PreconditionError("export_dataset: n_frames must be >= 0");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "maps", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "maps").string() + ": " + ec.message());
  const auto labels_path = out_dir / kLabelsFile;
  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw IoError("cannot open for writing: " + labels_path.string());

  std::vector<DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(n_frames));
  for (std::int64_t i = 0; i < n_frames; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    for (;;) {
      const Scene scene = sample_scene(scene_cfg, rng);
      const RobotModel model = make_robot_model(scene, scene_cfg, robot_cfg);
      const RobotState state = sample_initial_state(scene, scene_cfg, model, bounds, rng);
      const Pose camera = camera_pose(state, scene_cfg);
      RenderedMap rendered = [&]() -> RenderedMap {
        try {
          return render_confidence_map(scene, camera, scene_cfg.camera);
        } catch (const OutOfBounds&) {
          return {ConfidenceMap(1, 1), Vec2::Constant(-1.0), {-1, -1}};
        } catch (const BehindCamera&) {
          return {ConfidenceMap(1, 1), Vec2::Constant(-1.0), {-1, -1}};
        }
      }();
      if (rendered.tep_pixel.x < 0) continue;

      char name[64];
      std::snprintf(name, sizeof(name), "maps/frame_%06lld.pfm", static_cast<long long>(i));
      write_pfm(out_dir / name, rendered.map);

      DatasetRecord rec;
      rec.frame = i;
      rec.pfm_path = name;
      rec.tep_px = Vec2(rendered.tep_pixel.x, rendered.tep_pixel.y);
      rec.r6d = rot_to_6d<double>(camera.linear().transpose() * scene.trocar_pose.linear());
      rec.cam_pose = camera;
      rec.eye_rendered = scene.eye_rendered;
      labels << record_to_json(rec).dump() << '\n';
      records.push_back(std::move(rec));
      break;
    }
  }
  labels.close();
  if (!labels) throw IoError("write failed: " + labels_path.string());
  return records;
}

std::vector<DatasetRecord> read_labels(const std::filesystem::path& labels_path) {
  std::ifstream in(labels_path);
  if (!in) throw IoError("cannot open for reading: " + labels_path.string());
  std::vector<DatasetRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(labels_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(labels_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace trocar_dock
