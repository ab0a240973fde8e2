#pragma once

// Closed-loop trials, Monte-Carlo batches, detection statistics and the
// hand-eye error sweep.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trocar_dock/config_io.hpp"
#include "trocar_dock/planner.hpp"
#include "trocar_dock/simworld.hpp"

namespace trocar_dock {

struct TrajectoryRow {
  double t = 0.0;
  DockingPhase phase = DockingPhase::Orienting;  // phase after this step
  Pose tip_pose = Pose::Identity();
  MotionCommand command;
  bool det_valid = false;
  double dist_to_ray = -1.0;
  // True projections with the true camera, for alignment checks.
  Vec2 tip_px = Vec2::Zero();
  Vec2 tep_px = Vec2::Zero();
};

struct TrialReport {
  std::uint64_t seed = 0;
  std::int64_t trial_index = 0;
  bool success = false;
  std::string reason;  // docked | missed | workspace | timeout
  double sim_time = 0.0;
  double lateral_offset = 0.0;  // mm
  double axis_angle = 0.0;      // rad
  double inserted_depth = 0.0;  // mm
  std::int64_t n_frames = 0;
  std::int64_t n_detections = 0;  // valid ones
  double tep_error_mean = 0.0;    // px over valid detections
  std::int64_t n_axis_below_10deg = 0;
  std::int64_t n_axis_below_15deg = 0;
  std::vector<std::string> phase_history;  // phases in order of entry
};

/// Deterministic in (cfg, seed, trial_index). Appends one row per frame to
/// `trajectory` when given.
TrialReport run_trial(const TrialConfig& cfg, std::uint64_t seed, std::int64_t trial_index = 0,
                      std::vector<TrajectoryRow>* trajectory = nullptr);

struct BatchSummary {
  std::int64_t n_trials = 0;
  std::int64_t n_success = 0;
  double success_rate = 0.0;
  double sim_time_mean = 0.0;
  double sim_time_std = 0.0;
  // Over the per-trial mean TEP errors.
  double tep_error_mean = 0.0;
  double tep_error_median = 0.0;
  double tep_error_std = 0.0;
  // Pooled over every valid detection of every trial.
  double axis_below_10deg = 0.0;
  double axis_below_15deg = 0.0;
};

BatchSummary summarize(const std::vector<TrialReport>& reports);

struct BatchResult {
  BatchSummary summary;
  std::vector<TrialReport> reports;  // ordered by trial index
};

/// `threads` = 0 picks the hardware concurrency. Results do not depend on it.
BatchResult run_batch(const TrialConfig& cfg, std::int64_t n, std::uint64_t seed, unsigned threads = 0);

struct DetectionSummary {
  std::int64_t n_frames = 0;
  std::int64_t n_valid = 0;
  double tep_error_mean = 0.0;  // px, per valid frame
  double tep_error_median = 0.0;
  double tep_error_std = 0.0;
  double axis_error_mean = 0.0;  // rad
  double axis_below_10deg = 0.0;
  double axis_below_15deg = 0.0;
  // After the seven-frame filters, one value per full window.
  std::int64_t n_filtered = 0;
  double filtered_tep_error_mean = 0.0;
  double filtered_axis_below_10deg = 0.0;
};

/// Simulated detector against ground truth. Frames come in groups of seven
/// views of one static scene so the temporal filters can be scored too.
DetectionSummary evaluate_detection(const TrialConfig& cfg, std::int64_t n_frames, std::uint64_t seed);

struct PredictionRecord {
  std::int64_t frame = 0;
  std::string pfm_path;
  Rot6 r6d;
  Vec2 tep_px = Vec2::Zero();
};

/// One JSON object per line. Throws IoError, FormatError (with line number).
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

/// File-fed mode: scores prediction records against a dataset's labels.
/// Prediction lines hold {frame, pfm_path, r6d, tep_px}; pfm_path is relative
/// to the predictions file. The TEP is re-extracted from the predicted map.
DetectionSummary evaluate_predictions(const std::filesystem::path& dataset_dir,
                                      const std::filesystem::path& predictions_path);

struct SweepPoint {
  double offset = 0.0;  // mm along the camera x axis
  BatchSummary summary;
};

/// Lateral hand-eye translation error from 0 to `max_offset` in `points`
/// steps. Every point reuses the same trial seeds.
std::vector<SweepPoint> sweep_hand_eye(const TrialConfig& cfg, double max_offset, int points,
                                       std::int64_t trials_per_point, std::uint64_t seed, unsigned threads = 0);

}  // namespace trocar_dock
