#include "trocar_dock/cli.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trocar_dock/config_io.hpp"
#include "trocar_dock/harness.hpp"
#include "trocar_dock/report_io.hpp"

namespace trocar_dock {

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::int64_t n = 0;
  std::string out;
  std::string format = "json";
  unsigned threads = 0;
  std::int64_t index = 0;
  std::string predictions;
  std::string dataset;
  double max_offset = 0.5;
  int points = 6;
};

TrialConfig load(const Options& o) { return o.config.empty() ? TrialConfig{} : load_config(o.config); }

// Flat JSON object as a two-line CSV.
void print_csv(std::ostream& out, const ordered_json& j) {
  std::string header;
  std::string values;
  for (const auto& [key, value] : j.items()) {
    if (!header.empty()) {
      header += ',';
      values += ',';
    }
    header += key;
    values += value.dump();
  }
  out << header << '\n' << values << '\n';
}

void print(std::ostream& out, const Options& o, const ordered_json& j) {
  if (o.format == "csv") {
    print_csv(out, j);
  } else {
    out << j.dump(2) << '\n';
  }
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

int run_trial_cmd(const Options& o, std::ostream& out) {
  const TrialConfig cfg = load(o);
  std::vector<TrajectoryRow> rows;
  const TrialReport report = run_trial(cfg, o.seed, o.index, o.out.empty() ? nullptr : &rows);
  if (!o.out.empty()) {
    make_dir(o.out);
    write_json(std::filesystem::path(o.out) / "report.json", report_to_json(report));
    write_trajectory(std::filesystem::path(o.out) / "trajectory.jsonl", rows);
  }
  if (o.format == "csv") {
    out << csv_header() << '\n' << report_to_csv(report) << '\n';
  } else {
    out << report_to_json(report).dump(2) << '\n';
  }
  return kExitOk;
}

int run_batch_cmd(const Options& o, std::ostream& out) {
  const TrialConfig cfg = load(o);
  const BatchResult result = run_batch(cfg, o.n > 0 ? o.n : 200, o.seed, o.threads);
  if (!o.out.empty()) write_batch(o.out, result);
  print(out, o, summary_to_json(result.summary));
  return kExitOk;
}

int run_eval_cmd(const Options& o, std::ostream& out) {
  DetectionSummary s;
  if (!o.predictions.empty() || !o.dataset.empty()) {
    if (o.predictions.empty() || o.dataset.empty()) {
      throw CLI::ValidationError("eval-detection: --predictions and --dataset go together");
    }
    s = evaluate_predictions(o.dataset, o.predictions);
  } else {
    s = evaluate_detection(load(o), o.n > 0 ? o.n : 10000, o.seed);
  }
  const ordered_json j = detection_summary_to_json(s);
  if (!o.out.empty()) {
    make_dir(o.out);
    write_json(std::filesystem::path(o.out) / "detection.json", j);
  }
  print(out, o, j);
  return kExitOk;
}

int run_export_cmd(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw CLI::ValidationError("export-dataset: --out is required");
  const TrialConfig cfg = load(o);
  const auto records = export_dataset(cfg.scene, cfg.robot, cfg.start, o.n > 0 ? o.n : 2000, o.out, o.seed);
  ordered_json j;
  j["frames"] = records.size();
  j["labels"] = (std::filesystem::path(o.out) / kLabelsFile).string();
  print(out, o, j);
  return kExitOk;
}

int run_sweep_cmd(const Options& o, std::ostream& out) {
  const TrialConfig cfg = load(o);
  const auto points = sweep_hand_eye(cfg, o.max_offset, o.points, o.n > 0 ? o.n : 50, o.seed, o.threads);
  const ordered_json j = sweep_to_json(points);
  if (!o.out.empty()) {
    make_dir(o.out);
    write_json(std::filesystem::path(o.out) / "sweep.json", j);
  }
  if (o.format == "csv") {
    out << "offset,n_trials,n_success,success_rate\n";
    for (const auto& p : points) {
      out << nlohmann::json(p.offset).dump() << ',' << p.summary.n_trials << ',' << p.summary.n_success << ','
          << nlohmann::json(p.summary.success_rate).dump() << '\n';
    }
  } else {
    out << j.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Autonomous trocar docking simulator", "trocar-dock"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->type_name("PATH");
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--out", o.out, "Output directory")->type_name("DIR");
    sub->add_option("--format", o.format, "Stdout format")->check(CLI::IsMember({"json", "csv"}));
  };
  auto* trial = app.add_subcommand("trial", "Run one closed-loop trial");
  common(trial);
  trial->add_option("--index", o.index, "Trial index within the seed");

  auto* batch = app.add_subcommand("batch", "Run a Monte-Carlo batch");
  common(batch);
  batch->add_option("--n", o.n, "Number of trials (default 200)")->check(CLI::PositiveNumber);
  batch->add_option("--threads", o.threads, "Worker threads, 0 = all cores");

  auto* eval = app.add_subcommand("eval-detection", "Detection error statistics");
  common(eval);
  eval->add_option("--n", o.n, "Number of frames (default 10000)")->check(CLI::PositiveNumber);
  eval->add_option("--predictions", o.predictions, "Prediction JSONL (file-fed mode)")->type_name("PATH");
  eval->add_option("--dataset", o.dataset, "Dataset directory with labels.jsonl")->type_name("DIR");

  auto* exp = app.add_subcommand("export-dataset", "Write confidence maps and labels");
  common(exp);
  exp->add_option("--n", o.n, "Number of frames (default 2000)")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep-handeye", "Success rate against lateral hand-eye error");
  common(sweep);
  sweep->add_option("--n", o.n, "Trials per point (default 50)")->check(CLI::PositiveNumber);
  sweep->add_option("--threads", o.threads, "Worker threads, 0 = all cores");
  sweep->add_option("--max-offset", o.max_offset, "Largest offset, mm")->check(CLI::NonNegativeNumber);
  sweep->add_option("--points", o.points, "Number of sweep points")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*trial) return run_trial_cmd(o, out);
    if (*batch) return run_batch_cmd(o, out);
    if (*eval) return run_eval_cmd(o, out);
    if (*exp) return run_export_cmd(o, out);
    if (*sweep) return run_sweep_cmd(o, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace trocar_dock
