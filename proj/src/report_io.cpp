#include "trocar_dock/report_io.hpp"

#include <fstream>
#include <sstream>

#include "trocar_dock/config_io.hpp"
#include "trocar_dock/errors.hpp"

namespace trocar_dock {

namespace {

std::string num(double x) { return nlohmann::json(x).dump(); }

std::string join_phases(const std::vector<std::string>& phases) {
  std::string out;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (i) out += '|';
    out += phases[i];
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

ordered_json report_to_json(const TrialReport& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["trial_index"] = r.trial_index;
  j["success"] = r.success;
  j["reason"] = r.reason;
  j["sim_time"] = r.sim_time;
  j["lateral_offset"] = r.lateral_offset;
  j["axis_angle"] = r.axis_angle;
  j["inserted_depth"] = r.inserted_depth;
  j["n_frames"] = r.n_frames;
  j["n_detections"] = r.n_detections;
  j["tep_error_mean"] = r.tep_error_mean;
  j["n_axis_below_10deg"] = r.n_axis_below_10deg;
  j["n_axis_below_15deg"] = r.n_axis_below_15deg;
  j["phase_history"] = r.phase_history;
  return j;
}

TrialReport report_from_json(const nlohmann::json& j) {
  try {
    TrialReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.trial_index = j.at("trial_index").get<std::int64_t>();
    r.success = j.at("success").get<bool>();
    r.reason = j.at("reason").get<std::string>();
    r.sim_time = j.at("sim_time").get<double>();
    r.lateral_offset = j.at("lateral_offset").get<double>();
    r.axis_angle = j.at("axis_angle").get<double>();
    r.inserted_depth = j.at("inserted_depth").get<double>();
    r.n_frames = j.at("n_frames").get<std::int64_t>();
    r.n_detections = j.at("n_detections").get<std::int64_t>();
    r.tep_error_mean = j.at("tep_error_mean").get<double>();
    r.n_axis_below_10deg = j.at("n_axis_below_10deg").get<std::int64_t>();
    r.n_axis_below_15deg = j.at("n_axis_below_15deg").get<std::int64_t>();
    r.phase_history = j.at("phase_history").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trial report: ") + e.what());
  }
}

std::string csv_header() {
  return "seed,trial_index,success,reason,sim_time,lateral_offset,axis_angle,inserted_depth,n_frames,"
         "n_detections,tep_error_mean,n_axis_below_10deg,n_axis_below_15deg,phase_history";
}

std::string report_to_csv(const TrialReport& r) {
  std::ostringstream out;
  out << r.seed << ',' << r.trial_index << ',' << (r.success ? "true" : "false") << ',' << r.reason << ','
      << num(r.sim_time) << ',' << num(r.lateral_offset) << ',' << num(r.axis_angle) << ','
      << num(r.inserted_depth) << ',' << r.n_frames << ',' << r.n_detections << ',' << num(r.tep_error_mean) << ','
      << r.n_axis_below_10deg << ',' << r.n_axis_below_15deg << ',' << join_phases(r.phase_history);
  return out.str();
}

ordered_json summary_to_json(const BatchSummary& s) {
  ordered_json j;
  j["n_trials"] = s.n_trials;
  j["n_success"] = s.n_success;
  j["success_rate"] = s.success_rate;
  j["sim_time_mean"] = s.sim_time_mean;
  j["sim_time_std"] = s.sim_time_std;
  j["tep_error_mean"] = s.tep_error_mean;
  j["tep_error_median"] = s.tep_error_median;
  j["tep_error_std"] = s.tep_error_std;
  j["axis_below_10deg"] = s.axis_below_10deg;
  j["axis_below_15deg"] = s.axis_below_15deg;
  return j;
}

ordered_json detection_summary_to_json(const DetectionSummary& s) {
  ordered_json j;
  j["n_frames"] = s.n_frames;
  j["n_valid"] = s.n_valid;
  j["tep_error_mean"] = s.tep_error_mean;
  j["tep_error_median"] = s.tep_error_median;
  j["tep_error_std"] = s.tep_error_std;
  j["axis_error_mean"] = s.axis_error_mean;
  j["axis_below_10deg"] = s.axis_below_10deg;
  j["axis_below_15deg"] = s.axis_below_15deg;
  j["n_filtered"] = s.n_filtered;
  j["filtered_tep_error_mean"] = s.filtered_tep_error_mean;
  j["filtered_axis_below_10deg"] = s.filtered_axis_below_10deg;
  return j;
}

ordered_json sweep_to_json(const std::vector<SweepPoint>& points) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : points) {
    ordered_json j;
    j["offset"] = p.offset;
    j["summary"] = summary_to_json(p.summary);
    arr.push_back(std::move(j));
  }
  return arr;
}

ordered_json trajectory_row_to_json(const TrajectoryRow& row) {
  ordered_json j;
  j["t"] = row.t;
  j["phase"] = std::string(to_string(row.phase));
  j["tip_pose"] = pose_to_json(row.tip_pose);
  j["command"] = {{"linear", {row.command.linear.x(), row.command.linear.y(), row.command.linear.z()}},
                  {"angular", {row.command.angular.x(), row.command.angular.y()}}};
  j["det_valid"] = row.det_valid;
  j["dist_to_ray"] = row.dist_to_ray;
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_out(out, path);
}

void write_batch(const std::filesystem::path& dir, const BatchResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_json(dir / "summary.json", summary_to_json(result.summary));

  const auto csv_path = dir / "trials.csv";
  auto csv = open_out(csv_path);
  csv << csv_header() << '\n';
  for (const auto& r : result.reports) csv << report_to_csv(r) << '\n';
  close_out(csv, csv_path);

  const auto jsonl_path = dir / "trials.jsonl";
  auto jsonl = open_out(jsonl_path);
  for (const auto& r : result.reports) jsonl << report_to_json(r).dump() << '\n';
  close_out(jsonl, jsonl_path);
}

void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryRow>& rows) {
  auto out = open_out(path);
  for (const auto& row : rows) out << trajectory_row_to_json(row).dump() << '\n';
  close_out(out, path);
}

}  // namespace trocar_dock
