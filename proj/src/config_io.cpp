#include "trocar_dock/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "trocar_dock/errors.hpp"

namespace trocar_dock {

using nlohmann::json;

namespace {

// Reads keys of one JSON object and remembers which were consumed, so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      obj_ = &root.at(name_);
      if (!obj_->is_object()) throw ConfigError(name_ + ": expected an object");
    }
  }
  Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (obj_ && !obj_->is_object()) throw ConfigError(name_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  void get_deg(const char* key, double& radians) {
    double deg = rad_to_deg(radians);
    get(key, deg);
    radians = deg_to_rad(deg);
  }

  void get_vec3(const char* key, Vec3& out) {
    const json* v = find(key);
    if (!v) return;
    std::vector<double> xs;
    try {
      xs = v->get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": expected 3 numbers");
    }
    if (xs.size() != 3) throw ConfigError(name_ + "." + key + ": expected 3 numbers");
    out = Vec3(xs[0], xs[1], xs[2]);
  }

  void get_pose(const char* key, Pose& out) {
    if (const json* v = find(key)) out = pose_from_json(*v, name_ + "." + key);
  }

  const json* child(const char* key) { return find(key); }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!used_.contains(key)) throw ConfigError("unknown config key: " + name_ + "." + key);
    }
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    if (!obj_) return nullptr;
    const auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace

json pose_to_json(const Pose& pose) {
  json rot = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot.push_back(pose.linear()(i, j));
  const Vec3 t = pose.translation();
  return {{"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}};
}

Pose pose_from_json(const json& j, const std::string& where) {
  Section s(&j, where);
  std::vector<double> rot;
  Vec3 t = Vec3::Zero();
  s.get("rotation", rot);
  s.get_vec3("translation", t);
  s.finish();
  if (rot.size() != 9) throw ConfigError(where + ".rotation: expected 9 numbers");
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = rot[static_cast<std::size_t>(3 * i + k)];
  if (!is_rotation<double>(r, 1e-6)) throw ConfigError(where + ".rotation: not a rotation matrix");
  return make_transform<double>(r, t);
}

void TrialConfig::validate() const {
  scene.validate();
  robot.validate();
  start.validate();
  noise.validate();
  planner.validate();
  if (!(frame_rate > 0)) throw ConfigError("trial: frame_rate must be positive");
  if (!(max_sim_time > 0)) throw ConfigError("trial: max_sim_time must be positive");
  for (const auto& [a, b] : occlusions) {
    if (!(a <= b)) throw ConfigError("trial: occlusion intervals need begin <= end");
  }
}

json config_to_json(const TrialConfig& cfg) {
  const auto& s = cfg.scene;
  const auto& k = s.camera;
  json scene = {
      {"eye_radius", s.eye_radius},
      {"limbus_radius", s.limbus_radius},
      {"trocar_offset_arc", s.trocar_offset_arc},
      {"trocar_outer_radius", s.trocar_outer_radius},
      {"trocar_lumen_radius", s.trocar_lumen_radius},
      {"trocar_length", s.trocar_length},
      {"instrument_tip_radius", s.instrument_tip_radius},
      {"trocar_tilt_cone_deg", rad_to_deg(s.trocar_tilt_cone)},
      {"gaze_cone_deg", rad_to_deg(s.gaze_cone)},
      {"eye_hidden_fraction", s.eye_hidden_fraction},
      {"eye_center", {s.eye_center.x(), s.eye_center.y(), s.eye_center.z()}},
      {"camera", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
      {"hand_eye", pose_to_json(s.hand_eye)},
      {"hand_eye_error", pose_to_json(s.hand_eye_error)},
      {"tool_offset", pose_to_json(s.tool_offset)},
      {"rng_seed", s.rng_seed},
  };
  const auto& r = cfg.robot;
  json robot = {
      {"translation_limit", r.translation_limit},
      {"rotation_limit_deg", rad_to_deg(r.rotation_limit)},
      {"max_linear_speed", r.max_linear_speed},
      {"max_angular_speed_deg", rad_to_deg(r.max_angular_speed)},
      {"home_standoff", r.home_standoff},
  };
  const auto& b = cfg.start;
  json start = {
      {"distance_min", b.distance_min},
      {"distance_max", b.distance_max},
      {"approach_cone_deg", rad_to_deg(b.approach_cone)},
      {"misalignment_max_deg", rad_to_deg(b.misalignment_max)},
      {"image_margin", b.image_margin},
      {"require_reachable_target", b.require_reachable_target},
      {"reach_depth", b.reach_depth},
      {"max_attempts", b.max_attempts},
  };
  const auto& n = cfg.noise;
  json noise = {
      {"tep_jitter_std", n.tep_jitter_std},
      {"tep_outlier_prob", n.tep_outlier_prob},
      {"tep_outlier_range", n.tep_outlier_range},
      {"axis_tilt_std_deg", rad_to_deg(n.axis_tilt_std)},
      {"detection_dropout_prob", n.detection_dropout_prob},
  };
  const auto& p = cfg.planner;
  json planner = {
      {"orient_tolerance_deg", rad_to_deg(p.orient_tolerance)},
      {"ray_tolerance", p.ray_tolerance},
      {"approach_gain", p.approach_gain},
      {"v_max", p.v_max},
      {"v_min", p.v_min},
      {"insertion_depth", p.insertion_depth},
      {"insertion_margin", p.insertion_margin},
      {"success_lateral_tolerance", p.success_lateral_tolerance},
      {"success_angle_tolerance_deg", rad_to_deg(p.success_angle_tolerance)},
      {"orient_gain", p.orient_gain},
      {"max_angular_rate_deg", rad_to_deg(p.max_angular_rate)},
      {"min_angular_rate_deg", rad_to_deg(p.min_angular_rate)},
      {"align_gain", p.align_gain},
      {"depth_hint", p.depth_hint},
      {"parallax_pixel_sigma", p.parallax_pixel_sigma},
      {"max_depth_sigma", p.max_depth_sigma},
      {"ray_gate", p.ray_gate},
      {"probe_angle_deg", rad_to_deg(p.probe_angle)},
      {"max_probe_sweeps", p.max_probe_sweeps},
  };
  json occlusions = json::array();
  for (const auto& [a, e] : cfg.occlusions) occlusions.push_back({a, e});
  json trial = {{"frame_rate", cfg.frame_rate}, {"max_sim_time", cfg.max_sim_time}, {"occlusions", occlusions}};
  return {{"scene", scene}, {"robot", robot}, {"start", start}, {"noise", noise}, {"planner", planner},
          {"trial", trial}};
}

TrialConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrialConfig cfg;
  {
    Section s(j, "scene");
    auto& c = cfg.scene;
    s.get("eye_radius", c.eye_radius);
    s.get("limbus_radius", c.limbus_radius);
    s.get("trocar_offset_arc", c.trocar_offset_arc);
    s.get("trocar_outer_radius", c.trocar_outer_radius);
    s.get("trocar_lumen_radius", c.trocar_lumen_radius);
    s.get("trocar_length", c.trocar_length);
    s.get("instrument_tip_radius", c.instrument_tip_radius);
    s.get_deg("trocar_tilt_cone_deg", c.trocar_tilt_cone);
    s.get_deg("gaze_cone_deg", c.gaze_cone);
    s.get("eye_hidden_fraction", c.eye_hidden_fraction);
    s.get_vec3("eye_center", c.eye_center);
    {
      Section k(s.child("camera"), "scene.camera");
      k.get("fx", c.camera.fx);
      k.get("fy", c.camera.fy);
      k.get("cx", c.camera.cx);
      k.get("cy", c.camera.cy);
      k.get("width", c.camera.width);
      k.get("height", c.camera.height);
      k.finish();
    }
    s.get_pose("hand_eye", c.hand_eye);
    s.get_pose("hand_eye_error", c.hand_eye_error);
    s.get_pose("tool_offset", c.tool_offset);
    s.get("rng_seed", c.rng_seed);
    s.finish();
  }
  {
    Section s(j, "robot");
    auto& c = cfg.robot;
    s.get("translation_limit", c.translation_limit);
    s.get_deg("rotation_limit_deg", c.rotation_limit);
    s.get("max_linear_speed", c.max_linear_speed);
    s.get_deg("max_angular_speed_deg", c.max_angular_speed);
    s.get("home_standoff", c.home_standoff);
    s.finish();
  }
  {
    Section s(j, "start");
    auto& c = cfg.start;
    s.get("distance_min", c.distance_min);
    s.get("distance_max", c.distance_max);
    s.get_deg("approach_cone_deg", c.approach_cone);
    s.get_deg("misalignment_max_deg", c.misalignment_max);
    s.get("image_margin", c.image_margin);
    s.get("require_reachable_target", c.require_reachable_target);
    s.get("reach_depth", c.reach_depth);
    s.get("max_attempts", c.max_attempts);
    s.finish();
  }
  {
    Section s(j, "noise");
    auto& c = cfg.noise;
    s.get("tep_jitter_std", c.tep_jitter_std);
    s.get("tep_outlier_prob", c.tep_outlier_prob);
    s.get("tep_outlier_range", c.tep_outlier_range);
    s.get_deg("axis_tilt_std_deg", c.axis_tilt_std);
    s.get("detection_dropout_prob", c.detection_dropout_prob);
    s.finish();
  }
  {
    Section s(j, "planner");
    auto& c = cfg.planner;
    s.get_deg("orient_tolerance_deg", c.orient_tolerance);
    s.get("ray_tolerance", c.ray_tolerance);
    s.get("approach_gain", c.approach_gain);
    s.get("v_max", c.v_max);
    s.get("v_min", c.v_min);
    s.get("insertion_depth", c.insertion_depth);
    s.get("insertion_margin", c.insertion_margin);
    s.get("success_lateral_tolerance", c.success_lateral_tolerance);
    s.get_deg("success_angle_tolerance_deg", c.success_angle_tolerance);
    s.get("orient_gain", c.orient_gain);
    s.get_deg("max_angular_rate_deg", c.max_angular_rate);
    s.get_deg("min_angular_rate_deg", c.min_angular_rate);
    s.get("align_gain", c.align_gain);
    s.get("depth_hint", c.depth_hint);
    s.get("parallax_pixel_sigma", c.parallax_pixel_sigma);
    s.get("max_depth_sigma", c.max_depth_sigma);
    s.get("ray_gate", c.ray_gate);
    s.get_deg("probe_angle_deg", c.probe_angle);
    s.get("max_probe_sweeps", c.max_probe_sweeps);
    s.finish();
  }
  {
    Section s(j, "trial");
    s.get("frame_rate", cfg.frame_rate);
    s.get("max_sim_time", cfg.max_sim_time);
    std::vector<std::vector<double>> occ;
    s.get("occlusions", occ);
    for (const auto& iv : occ) {
      if (iv.size() != 2) throw ConfigError("trial.occlusions: each interval needs [begin, end]");
      cfg.occlusions.emplace_back(iv[0], iv[1]);
    }
    s.finish();
  }
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> kSections{"scene", "robot", "start", "noise", "planner", "trial"};
    if (!kSections.contains(key)) throw ConfigError("unknown config section: " + key);
  }
  cfg.validate();
  return cfg;
}

TrialConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const std::filesystem::path& path, const TrialConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << config_to_json(cfg).dump(2) << '\n';
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace trocar_dock
