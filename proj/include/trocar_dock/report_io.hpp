#pragma once

// Report serialization.
//
// trials.csv header:
//   seed,trial_index,success,reason,sim_time,lateral_offset,axis_angle,
//   inserted_depth,n_frames,n_detections,tep_error_mean,n_axis_below_10deg,
//   n_axis_below_15deg,phase_history
// phase_history is '|'-separated. Numbers use the same shortest round-trip
// formatting as the JSON outputs, so both files carry identical values.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "trocar_dock/harness.hpp"

namespace trocar_dock {

using ordered_json = nlohmann::ordered_json;

ordered_json report_to_json(const TrialReport& r);
TrialReport report_from_json(const nlohmann::json& j);  // throws FormatError

std::string csv_header();
std::string report_to_csv(const TrialReport& r);

ordered_json summary_to_json(const BatchSummary& s);
ordered_json detection_summary_to_json(const DetectionSummary& s);
ordered_json sweep_to_json(const std::vector<SweepPoint>& points);

// {t, phase, tip_pose, command, det_valid, dist_to_ray}
ordered_json trajectory_row_to_json(const TrajectoryRow& row);

// summary.json, trials.csv and trials.jsonl under `dir` (created if missing).
void write_batch(const std::filesystem::path& dir, const BatchResult& result);
void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryRow>& rows);
void write_json(const std::filesystem::path& path, const ordered_json& j);

}  // namespace trocar_dock
