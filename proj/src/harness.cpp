#include "trocar_dock/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "trocar_dock/errors.hpp"
#include "trocar_dock/perception.hpp"
#include "trocar_dock/pfm.hpp"
#include "trocar_dock/rng.hpp"

namespace trocar_dock {

namespace {

// Streams of one trial's key.
enum Stream : std::uint64_t { kSceneStream = 0, kStartStream = 1, kNoiseStream = 2 };

const double kTenDeg = deg_to_rad(10.0);
const double kFifteenDeg = deg_to_rad(15.0);

// Angle between unit vectors, exact zero for identical inputs.
double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

bool occluded(const TrialConfig& cfg, double t) {
  return std::any_of(cfg.occlusions.begin(), cfg.occlusions.end(),
                     [t](const auto& iv) { return t >= iv.first && t < iv.second; });
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pop_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double median_or_zero(const std::vector<double>& xs) { return xs.empty() ? 0.0 : median_of(xs); }

double fraction(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

unsigned resolve_threads(unsigned threads, std::int64_t jobs) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(jobs, 1)));
}

// Runs job(i) for i in [0, n) on a small pool; the first exception wins.
template <class Job>
void parallel_for(std::int64_t n, unsigned threads, Job job) {
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  const unsigned count = resolve_threads(threads, n);
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct ErrorTally {
  std::vector<double> tep;
  std::vector<double> axis;

  void add(double tep_err, double axis_err) {
    tep.push_back(tep_err);
    axis.push_back(axis_err);
  }
  std::int64_t below(double limit) const {
    return std::count_if(axis.begin(), axis.end(), [limit](double a) { return a < limit; });
  }
};

}  // namespace

TrialReport run_trial(const TrialConfig& cfg, std::uint64_t seed, std::int64_t trial_index,
                      std::vector<TrajectoryRow>* trajectory) {
  cfg.validate();
  const std::uint64_t key = CounterRng::derive_key(seed, static_cast<std::uint64_t>(trial_index));
  CounterRng scene_rng(key, kSceneStream);
  CounterRng start_rng(key, kStartStream);
  CounterRng noise_rng(key, kNoiseStream);

  const Scene scene = sample_scene(cfg.scene, scene_rng);
  const RobotModel model = make_robot_model(scene, cfg.scene, cfg.robot);
  RobotState state = sample_initial_state(scene, cfg.scene, model, cfg.start, start_rng);
  DockingController controller(cfg.planner, model, cfg.scene.camera);

  TrialReport report;
  report.seed = seed;
  report.trial_index = trial_index;
  report.phase_history.emplace_back(to_string(controller.state().phase));

  const double dt = 1.0 / cfg.frame_rate;
  const auto max_frames = static_cast<std::int64_t>(std::floor(cfg.max_sim_time * cfg.frame_rate + 1e-9));
  double tep_error_sum = 0.0;
  DockingPhase last = controller.state().phase;
  bool finished = false;

  for (std::int64_t k = 0; k < max_frames; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Pose camera = camera_pose(state, cfg.scene);
    DetectionEstimate det = simulate_detection(scene, camera, cfg.scene.camera, cfg.noise, noise_rng, k);
    if (occluded(cfg, t)) det.valid = false;
    const TrueView view = true_view(scene, camera, cfg.scene.camera);
    if (det.valid) {
      ++report.n_detections;
      tep_error_sum += (det.tep.pixel() - view.tep_px).norm();
      const double axis_err = angle_between(det.z_axis, view.axis_cam.normalized());
      report.n_axis_below_10deg += axis_err < kTenDeg;
      report.n_axis_below_15deg += axis_err < kFifteenDeg;
    }

    const StepOutput out = controller.step(state, det, dt);
    report.n_frames = k + 1;
    if (out.state.phase != last) {
      last = out.state.phase;
      report.phase_history.emplace_back(to_string(last));
    }
    if (trajectory) {
      TrajectoryRow row;
      row.t = t;
      row.phase = out.state.phase;
      row.tip_pose = tool_tip_pose(state, cfg.scene);
      row.command = out.command;
      row.det_valid = det.valid;
      row.dist_to_ray = out.dist_to_ray;
      const Vec3 tip_cam = invert(camera) * row.tip_pose.translation();
      row.tip_px = tip_cam.z() > 0 ? project<double>(cfg.scene.camera, tip_cam) : Vec2::Constant(-1.0);
      row.tep_px = view.tep_px;
      trajectory->push_back(row);
    }
    if (out.state.phase == DockingPhase::Done || out.state.phase == DockingPhase::Failed) {
      report.sim_time = t;
      finished = true;
      break;
    }
    state = robot_apply(state, out.command, dt, model);
    report.sim_time = static_cast<double>(k + 1) * dt;
  }
  report.sim_time = std::min(report.sim_time, cfg.max_sim_time);

  const SuccessMetrics m = check_success(tool_tip_pose(state, cfg.scene), scene, cfg.planner);
  report.lateral_offset = m.lateral_offset;
  report.axis_angle = m.axis_angle;
  report.inserted_depth = m.inserted_depth;
  report.tep_error_mean = report.n_detections > 0 ? tep_error_sum / static_cast<double>(report.n_detections) : 0.0;
  if (!finished) {
    report.reason = "timeout";
  } else if (controller.state().phase == DockingPhase::Failed) {
    report.reason = "workspace";
  } else {
    report.success = m.success;
    report.reason = m.success ? "docked" : "missed";
  }
  return report;
}

BatchSummary summarize(const std::vector<TrialReport>& reports) {
  BatchSummary s;
  s.n_trials = static_cast<std::int64_t>(reports.size());
  std::vector<double> times;
  std::vector<double> tep_means;
  std::int64_t detections = 0;
  std::int64_t below10 = 0;
  std::int64_t below15 = 0;
  for (const auto& r : reports) {
    s.n_success += r.success;
    times.push_back(r.sim_time);
    if (r.n_detections > 0) tep_means.push_back(r.tep_error_mean);
    detections += r.n_detections;
    below10 += r.n_axis_below_10deg;
    below15 += r.n_axis_below_15deg;
  }
  s.success_rate = fraction(s.n_success, s.n_trials);
  s.sim_time_mean = mean_of(times);
  s.sim_time_std = pop_std(times);
  s.tep_error_mean = mean_of(tep_means);
  s.tep_error_median = median_or_zero(tep_means);
  s.tep_error_std = pop_std(tep_means);
  s.axis_below_10deg = fraction(below10, detections);
  s.axis_below_15deg = fraction(below15, detections);
  return s;
}

BatchResult run_batch(const TrialConfig& cfg, std::int64_t n, std::uint64_t seed, unsigned threads) {
  if (n < 1) throw PreconditionError("run_batch: n must be >= 1");
  cfg.validate();
  BatchResult result;
  result.reports.resize(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](std::int64_t i) { result.reports[static_cast<std::size_t>(i)] = run_trial(cfg, seed, i); });
  result.summary = summarize(result.reports);
  return result;
}

DetectionSummary evaluate_detection(const TrialConfig& cfg, std::int64_t n_frames, std::uint64_t seed) {
  if (n_frames < 1) throw PreconditionError("evaluate_detection: n_frames must be >= 1");
  cfg.validate();
  const auto group = static_cast<std::int64_t>(FilterWindow::kDefaultCapacity);
  ErrorTally raw;
  ErrorTally filtered;
  DetectionSummary s;

  for (std::int64_t g = 0; g * group < n_frames; ++g) {
    const std::uint64_t key = CounterRng::derive_key(seed, static_cast<std::uint64_t>(g));
    CounterRng scene_rng(key, kSceneStream);
    CounterRng start_rng(key, kStartStream);
    CounterRng noise_rng(key, kNoiseStream);
    const Scene scene = sample_scene(cfg.scene, scene_rng);
    const RobotModel model = make_robot_model(scene, cfg.scene, cfg.robot);
    const RobotState state = sample_initial_state(scene, cfg.scene, model, cfg.start, start_rng);
    const Pose camera = camera_pose(state, cfg.scene);
    const TrueView view = true_view(scene, camera, cfg.scene.camera);
    const Vec3 axis = view.axis_cam.normalized();

    FilterWindow window;
    const std::int64_t frames = std::min(group, n_frames - g * group);
    for (std::int64_t f = 0; f < frames; ++f) {
      const DetectionEstimate det = simulate_detection(scene, camera, cfg.scene.camera, cfg.noise, noise_rng, f);
      ++s.n_frames;
      if (!det.valid) continue;
      raw.add((det.tep.pixel() - view.tep_px).norm(), angle_between(det.z_axis, axis));
      window.push(det);
    }
    if (window.full()) {
      const TepEstimate tep = temporal_filter_tep(window);
      filtered.add((tep.pixel() - view.tep_px).norm(), angle_between(temporal_filter_orientation(window), axis));
    }
  }

  s.n_valid = static_cast<std::int64_t>(raw.tep.size());
  s.tep_error_mean = mean_of(raw.tep);
  s.tep_error_median = median_or_zero(raw.tep);
  s.tep_error_std = pop_std(raw.tep);
  s.axis_error_mean = mean_of(raw.axis);
  s.axis_below_10deg = fraction(raw.below(kTenDeg), s.n_valid);
  s.axis_below_15deg = fraction(raw.below(kFifteenDeg), s.n_valid);
  s.n_filtered = static_cast<std::int64_t>(filtered.tep.size());
  s.filtered_tep_error_mean = mean_of(filtered.tep);
  s.filtered_axis_below_10deg = fraction(filtered.below(kTenDeg), s.n_filtered);
  return s;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.frame = j.at("frame").get<std::int64_t>();
      r.pfm_path = j.at("pfm_path").get<std::string>();
      const auto r6 = j.at("r6d").get<std::vector<double>>();
      const auto px = j.at("tep_px").get<std::vector<double>>();
      if (r6.size() != 6) throw FormatError("r6d needs 6 numbers");
      if (px.size() != 2) throw FormatError("tep_px needs 2 numbers");
      for (int i = 0; i < 6; ++i) r.r6d.coeffs(i) = r6[static_cast<std::size_t>(i)];
      r.tep_px = Vec2(px[0], px[1]);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  return out;
}

DetectionSummary evaluate_predictions(const std::filesystem::path& dataset_dir,
                                      const std::filesystem::path& predictions_path) {
  std::map<std::int64_t, DatasetRecord> labels;
  for (auto& r : read_labels(dataset_dir / kLabelsFile)) labels.emplace(r.frame, std::move(r));
  const auto predictions = read_predictions(predictions_path);
  const auto root = predictions_path.parent_path();

  ErrorTally raw;
  DetectionSummary s;
  for (const auto& p : predictions) {
    const auto it = labels.find(p.frame);
    if (it == labels.end()) {
      throw FormatError(predictions_path.string() + ": frame " + std::to_string(p.frame) + " has no label");
    }
    ++s.n_frames;
    const ConfidenceMap map = read_pfm(root / p.pfm_path);
    TepEstimate tep;
    try {
      tep = tep_from_map(map, p.frame);
    } catch (const NoDetection&) {
      continue;
    }
    Vec3 z_pred;
    try {
      z_pred = sixd_to_rot<double>(p.r6d).col(2);
    } catch (const DegenerateInput& e) {
      throw FormatError(predictions_path.string() + ": frame " + std::to_string(p.frame) + ": " + e.what());
    }
    const Vec3 z_true = sixd_to_rot<double>(it->second.r6d).col(2);
    raw.add((tep.pixel() - it->second.tep_px).norm(), angle_between(z_pred, z_true));
  }
  s.n_valid = static_cast<std::int64_t>(raw.tep.size());
  s.tep_error_mean = mean_of(raw.tep);
  s.tep_error_median = median_or_zero(raw.tep);
  s.tep_error_std = pop_std(raw.tep);
  s.axis_error_mean = mean_of(raw.axis);
  s.axis_below_10deg = fraction(raw.below(kTenDeg), s.n_valid);
  s.axis_below_15deg = fraction(raw.below(kFifteenDeg), s.n_valid);
  return s;
}

std::vector<SweepPoint> sweep_hand_eye(const TrialConfig& cfg, double max_offset, int points,
                                       std::int64_t trials_per_point, std::uint64_t seed, unsigned threads) {
  if (points < 1) throw PreconditionError("sweep_hand_eye: points must be >= 1");
  if (!(max_offset >= 0)) throw PreconditionError("sweep_hand_eye: max_offset must be >= 0");
  std::vector<SweepPoint> out;
  for (int i = 0; i < points; ++i) {
    SweepPoint pt;
    pt.offset = points == 1 ? 0.0 : max_offset * static_cast<double>(i) / static_cast<double>(points - 1);
    TrialConfig c = cfg;
    c.scene.hand_eye_error = Pose::Identity();
    c.scene.hand_eye_error.translation() = Vec3(pt.offset, 0.0, 0.0);
    pt.summary = run_batch(c, trials_per_point, seed, threads).summary;
    out.push_back(pt);
  }
  return out;
}

}  // namespace trocar_dock
