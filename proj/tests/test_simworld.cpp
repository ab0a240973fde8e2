#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "trocar_dock/errors.hpp"
#include "trocar_dock/pfm.hpp"
#include "trocar_dock/simworld.hpp"

namespace trocar_dock {
namespace {

double angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

double polar_of(const SceneConfig& c) { return std::asin(c.limbus_radius / c.eye_radius) + c.trocar_offset_arc / c.eye_radius; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct World {
  SceneConfig scene_cfg;
  RobotConfig robot_cfg;
  Scene scene;
  RobotModel model;
  RobotState start;
};

World make_world(std::uint64_t seed) {
  World w;
  CounterRng rng(seed);
  w.scene = sample_scene(w.scene_cfg, rng);
  w.model = make_robot_model(w.scene, w.scene_cfg, w.robot_cfg);
  w.start = sample_initial_state(w.scene, w.scene_cfg, w.model, InitialPoseBounds{}, rng);
  return w;
}

TEST(SampleScene, GeometricInvariants) {
  SceneConfig cfg;
  CounterRng rng(11);
  const double polar = polar_of(cfg);
  for (int i = 0; i < 2000; ++i) {
    const Scene s = sample_scene(cfg, rng);
    ASSERT_NEAR((s.tep() - s.eye_center).norm(), cfg.eye_radius, 1e-9);
    ASSERT_NEAR(s.surface_normal.norm(), 1.0, 1e-12);
    ASSERT_LT((s.tep() - s.eye_center - cfg.eye_radius * s.surface_normal).norm(), 1e-9);
    ASSERT_TRUE(is_rotation<double>(s.trocar_pose.linear()));
    // Outward: the trocar axis stays within the tilt cone of the normal.
    ASSERT_LE(angle(s.trocar_axis(), s.surface_normal), cfg.trocar_tilt_cone + 1e-9);
    // The TEP sits on the ring `polar` away from the (tilted) eye axis.
    ASSERT_LE(std::abs(angle(s.surface_normal, Vec3::UnitZ()) - polar), cfg.gaze_cone + 1e-9);
  }
}

TEST(SampleScene, DegenerateCones) {
  SceneConfig cfg;
  cfg.trocar_tilt_cone = 0.0;
  cfg.gaze_cone = 0.0;
  cfg.eye_center = Vec3(1, -2, 3);
  CounterRng rng(12);
  for (int i = 0; i < 500; ++i) {
    const Scene s = sample_scene(cfg, rng);
    ASSERT_LT((s.trocar_axis() - s.surface_normal).norm(), 1e-12);
    ASSERT_NEAR(angle(s.surface_normal, Vec3::UnitZ()), polar_of(cfg), 1e-9);
    // Arc length from the limbus circle along the sclera.
    const double limbus_polar = std::asin(cfg.limbus_radius / cfg.eye_radius);
    ASSERT_NEAR(cfg.eye_radius * (angle(s.surface_normal, Vec3::UnitZ()) - limbus_polar), cfg.trocar_offset_arc, 1e-9);
  }
}

TEST(SampleScene, HiddenFractionAndDeterminism) {
  SceneConfig cfg;
  CounterRng rng(13);
  int hidden = 0;
  for (int i = 0; i < 10000; ++i) hidden += !sample_scene(cfg, rng).eye_rendered;
  EXPECT_GE(hidden / 10000.0, 0.18);
  EXPECT_LE(hidden / 10000.0, 0.22);

  CounterRng a(99, 3);
  CounterRng b(99, 3);
  for (int i = 0; i < 10; ++i) {
    const Scene x = sample_scene(cfg, a);
    const Scene y = sample_scene(cfg, b);
    EXPECT_TRUE(x.trocar_pose.matrix() == y.trocar_pose.matrix());
    EXPECT_EQ(x.eye_rendered, y.eye_rendered);
  }
}

TEST(SceneConfig, Validation) {
  SceneConfig c;
  c.trocar_lumen_radius = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.instrument_tip_radius = 0.4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.eye_hidden_fraction = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RobotModel, HomeAndInverseKinematics) {
  const World w = make_world(21);
  const JointVector zero = JointVector::Zero();
  const RobotState home = make_robot_state(w.model, zero);
  const Pose tip = tool_tip_pose(home, w.scene_cfg);
  EXPECT_LT((tip.translation() - (w.scene.tep() + w.robot_cfg.home_standoff * w.scene.surface_normal)).norm(), 1e-9);
  EXPECT_LT((tip.linear().col(2) - w.scene.surface_normal).norm(), 1e-12);

  std::mt19937_64 gen(21);
  for (int i = 0; i < 500; ++i) {
    const auto u = oracle::random_unit(gen);
    Vec3 axis(u[0], u[1], u[2]);
    if (axis.dot(w.scene.surface_normal) < 0.3) axis = (axis + 2.0 * w.scene.surface_normal).normalized();
    const Vec3 target = w.scene.tep() + Vec3(u[2], u[0], u[1]) * 4.0;
    JointVector q;
    q.tail<2>() = w.model.rotation_joints_for_axis(axis);
    q.head<3>() = w.model.translation_for_tip(q.tail<2>(), target);
    const Pose t = tool_tip_pose(make_robot_state(w.model, q), w.scene_cfg);
    ASSERT_LT((t.linear().col(2) - axis).norm(), 1e-9);
    ASSERT_LT((t.translation() - target).norm(), 1e-9);
  }
}

TEST(RobotApply, ZeroCommandAndZeroDt) {
  const World w = make_world(22);
  const RobotState s = robot_apply(w.start, MotionCommand::zero(), 1.0 / 30.0, w.model);
  EXPECT_EQ(s.joint_values, w.start.joint_values);
  EXPECT_TRUE(s.endeffector_pose.matrix() == w.start.endeffector_pose.matrix());
  MotionCommand cmd;
  cmd.linear = Vec3(1, 2, 3);
  EXPECT_EQ(robot_apply(w.start, cmd, 0.0, w.model).joint_values, w.start.joint_values);
  EXPECT_THROW(robot_apply(w.start, cmd, -0.1, w.model), PreconditionError);
}

TEST(RobotApply, SpeedClampAndHalfSteps) {
  const World w = make_world(23);
  MotionCommand fast;
  fast.linear = Vec3(100, -100, 0.5);
  fast.angular = Vec2(3, -0.1);
  const double dt = 0.01;
  const RobotState s = robot_apply(w.start, fast, dt, w.model);
  JointVector expected = w.start.joint_values;
  expected += dt * (JointVector() << 5.0, -5.0, 0.5, 0.5, -0.1).finished();
  EXPECT_LT((s.joint_values - expected).norm(), 1e-12);
  EXPECT_TRUE(s.within_workspace);

  const RobotState half = robot_apply(robot_apply(w.start, fast, dt / 2, w.model), fast, dt / 2, w.model);
  EXPECT_LT((half.joint_values - s.joint_values).norm(), 1e-12);
  EXPECT_LT((half.endeffector_pose.matrix() - s.endeffector_pose.matrix()).norm(), 1e-9);
}

TEST(RobotApply, WorkspaceClamp) {
  const World w = make_world(24);
  MotionCommand cmd;
  cmd.linear = Vec3(5, 0, 0);
  RobotState s = w.start;
  int steps = 0;
  while (s.within_workspace && steps < 10000) {
    s = robot_apply(s, cmd, 0.1, w.model);
    ++steps;
  }
  ASSERT_FALSE(s.within_workspace);
  EXPECT_EQ(s.joint_values(0), w.robot_cfg.translation_limit);
  EXPECT_TRUE(w.model.within_limits(s.joint_values));
}

TEST(KinematicChain, CameraFromHandEye) {
  World w = make_world(25);
  const Pose ee = w.start.endeffector_pose;
  const Pose cam = camera_pose(w.start, w.scene_cfg);
  EXPECT_LT((cam.matrix() - (ee * w.scene_cfg.hand_eye).matrix()).norm(), 1e-12);
  EXPECT_TRUE(cam.matrix() == nominal_camera_pose(w.start, w.scene_cfg).matrix());

  // Default mount: camera 3 mm beside the shaft looking down at the tip.
  const Pose he = default_hand_eye();
  EXPECT_LT((he.translation() - Vec3(0, 3, 10)).norm(), 1e-12);
  const Vec3 tip_cam = invert(he) * Vec3(0, 0, -15);
  EXPECT_GT(tip_cam.z(), 0.0);
  const Vec3 target_cam = invert(he) * Vec3(0, 0, -25);
  EXPECT_NEAR(target_cam.x(), 0.0, 1e-12);
  EXPECT_NEAR(target_cam.y(), 0.0, 1e-12);

  w.scene_cfg.hand_eye_error = make_transform<double>(Mat3::Identity(), Vec3(0.2, 0, 0));
  const Pose noisy = camera_pose(w.start, w.scene_cfg);
  EXPECT_LT((noisy.translation() - cam.translation() - cam.linear().col(0) * 0.2).norm(), 1e-12);
  EXPECT_TRUE(nominal_camera_pose(w.start, w.scene_cfg).matrix() == cam.matrix());
}

TEST(SampleInitialState, RespectsBounds) {
  const InitialPoseBounds b;
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    World w = make_world(seed);
    const Pose tip = tool_tip_pose(w.start, cfg);
    const double d = (tip.translation() - w.scene.tep()).norm();
    ASSERT_GE(d, b.distance_min - 1e-9);
    ASSERT_LE(d, b.distance_max + 1e-9);
    ASSERT_LE(angle(tip.translation() - w.scene.tep(), w.scene.trocar_axis()), b.approach_cone + 1e-9);
    ASSERT_LE(angle(tip.linear().col(2), w.scene.trocar_axis()), b.misalignment_max + 1e-9);
    ASSERT_TRUE(w.start.within_workspace);
    const TrueView v = true_view(w.scene, camera_pose(w.start, cfg), cfg.camera);
    ASSERT_TRUE(v.in_front);
    ASSERT_GE(v.tep_px.minCoeff(), b.image_margin);
    ASSERT_LT(v.tep_px.x(), cfg.camera.width - b.image_margin);
    ASSERT_LT(v.tep_px.y(), cfg.camera.height - b.image_margin);
  }
}

TEST(RenderConfidenceMap, PeakAndSupport) {
  const World w = make_world(31);
  const Pose cam = camera_pose(w.start, w.scene_cfg);
  const RenderedMap r = render_confidence_map(w.scene, cam, w.scene_cfg.camera);
  EXPECT_EQ(r.map.at(r.tep_pixel.x, r.tep_pixel.y), 1.0f);
  EXPECT_EQ(r.map.values().maxCoeff(), 1.0f);
  EXPECT_FLOAT_EQ(r.map.at(r.tep_pixel.x + 1, r.tep_pixel.y), static_cast<float>(std::exp(-0.5)));
  EXPECT_EQ(r.map.at(r.tep_pixel.x + 15, r.tep_pixel.y + 4), 0.0f);  // 15.5 px away
  EXPECT_NO_THROW(r.map.validate());
  EXPECT_LE(std::abs(r.projected_tep.x() - r.tep_pixel.x), 0.5);
  EXPECT_LE(std::abs(r.projected_tep.y() - r.tep_pixel.y), 0.5);
}

TEST(RenderConfidenceMap, PerceptionRecoversRenderedPixel) {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const World w = make_world(1000 + seed);
    const RenderedMap r = render_confidence_map(w.scene, camera_pose(w.start, cfg), cfg.camera);
    const TepEstimate t = tep_from_map(r.map);
    ASSERT_EQ(t.u, r.tep_pixel.x);
    ASSERT_EQ(t.v, r.tep_pixel.y);
    ASSERT_LE((t.pixel() - r.projected_tep).cwiseAbs().maxCoeff(), 0.5);
  }
}

TEST(RenderConfidenceMap, OutsideFrame) {
  World w = make_world(32);
  Pose cam = camera_pose(w.start, w.scene_cfg);
  cam = cam * make_transform<double>(Eigen::AngleAxisd(1.2, Vec3::UnitY()).toRotationMatrix(), Vec3::Zero());
  EXPECT_ANY_THROW(render_confidence_map(w.scene, cam, w.scene_cfg.camera));
}

TEST(SimulateDetection, NoiseFreeMatchesTruth) {
  const World w = make_world(41);
  const Pose cam = camera_pose(w.start, w.scene_cfg);
  CounterRng rng(1);
  const auto d = simulate_detection(w.scene, cam, w.scene_cfg.camera, NoiseModel::none(), rng, 17);
  const TrueView v = true_view(w.scene, cam, w.scene_cfg.camera);
  EXPECT_TRUE(d.valid);
  EXPECT_EQ(d.tep.frame_index, 17);
  EXPECT_EQ(d.tep.pixel(), v.tep_px);
  EXPECT_LT((d.z_axis - v.axis_cam).norm(), 1e-12);
}

TEST(SimulateDetection, ConstantDrawCount) {
  const World w = make_world(42);
  const Pose cam = camera_pose(w.start, w.scene_cfg);
  NoiseModel drop;
  drop.detection_dropout_prob = 1.0;
  CounterRng a(5);
  CounterRng b(5);
  CounterRng c(5);
  EXPECT_TRUE(simulate_detection(w.scene, cam, w.scene_cfg.camera, NoiseModel::none(), a, 0).valid);
  EXPECT_FALSE(simulate_detection(w.scene, cam, w.scene_cfg.camera, drop, b, 0).valid);
  simulate_detection(w.scene, cam, w.scene_cfg.camera, NoiseModel{}, c, 0);
  EXPECT_EQ(a.counter(), b.counter());
  EXPECT_EQ(a.counter(), c.counter());
}

TEST(SimulateDetection, NoiseStatistics) {
  const World w = make_world(43);
  const Pose cam = camera_pose(w.start, w.scene_cfg);
  const TrueView v = true_view(w.scene, cam, w.scene_cfg.camera);
  NoiseModel n;
  n.tep_outlier_prob = 0.0;
  n.detection_dropout_prob = 0.0;
  CounterRng rng(6);
  double su = 0, suu = 0, tilt = 0;
  const int count = 20000;
  for (int i = 0; i < count; ++i) {
    const auto d = simulate_detection(w.scene, cam, w.scene_cfg.camera, n, rng, i);
    const double du = d.tep.u - v.tep_px.x();
    su += du;
    suu += du * du;
    tilt += angle(d.z_axis, v.axis_cam);
  }
  EXPECT_NEAR(su / count, 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(suu / count), n.tep_jitter_std, 0.05);
  // E|N(0, s)| = s * sqrt(2 / pi)
  EXPECT_NEAR(tilt / count, n.axis_tilt_std * std::sqrt(2.0 / std::numbers::pi), 0.002);
}

TEST(ExportDataset, EmptyAndDeterministic) {
  const auto dir = oracle::temp_dir("dataset");
  const auto none = export_dataset({}, {}, {}, 0, dir / "empty", 3);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(slurp(dir / "empty" / kLabelsFile), "");
  EXPECT_TRUE(read_labels(dir / "empty" / kLabelsFile).empty());

  const auto a = export_dataset({}, {}, {}, 6, dir / "a", 3);
  export_dataset({}, {}, {}, 6, dir / "b", 3);
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(slurp(dir / "a" / kLabelsFile), slurp(dir / "b" / kLabelsFile));
  EXPECT_EQ(slurp(dir / "a" / a[5].pfm_path), slurp(dir / "b" / a[5].pfm_path));

  const auto back = read_labels(dir / "a" / kLabelsFile);
  ASSERT_EQ(back.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(back[i].frame, static_cast<std::int64_t>(i));
    EXPECT_EQ(back[i].pfm_path, a[i].pfm_path);
    EXPECT_EQ(back[i].tep_px, a[i].tep_px);
    EXPECT_EQ(back[i].r6d.coeffs, a[i].r6d.coeffs);
    EXPECT_TRUE(back[i].cam_pose.matrix() == a[i].cam_pose.matrix());
    EXPECT_EQ(back[i].eye_rendered, a[i].eye_rendered);
    const auto map = read_pfm(dir / "a" / a[i].pfm_path);
    EXPECT_EQ(map.width(), 1280);
    EXPECT_EQ(map.height(), 720);
    EXPECT_EQ(tep_from_map(map).pixel(), a[i].tep_px);
    EXPECT_TRUE(is_rotation<double>(sixd_to_rot(a[i].r6d)));
  }
  EXPECT_THROW(export_dataset({}, {}, {}, -1, dir / "neg", 3), PreconditionError);
}

TEST(ReadLabels, Errors) {
  const auto dir = oracle::temp_dir("labels");
  EXPECT_THROW(read_labels(dir / "missing.jsonl"), IoError);
  std::ofstream(dir / "bad.jsonl") << "{\"frame\": 0}\n";
  EXPECT_THROW(read_labels(dir / "bad.jsonl"), FormatError);
}

}  // namespace
}  // namespace trocar_dock
