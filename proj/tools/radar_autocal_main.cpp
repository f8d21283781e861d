// radar-autocal: automatic extrinsic calibration of roadside radar sensors
// from recorded target lists and connected-vehicle localization traces.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "autocal/calibration_io.hpp"
#include "autocal/pipeline.hpp"
#include "autocal/scenario_config.hpp"

namespace fs = std::filesystem;
using namespace autocal;

namespace {

int exit_code_for(Stage stage) {
  switch (stage) {
    case Stage::ingest: return 2;
    case Stage::cluster: return 3;
    case Stage::groundplane: return 4;
    case Stage::hypothesis: return 5;
    case Stage::refine: return 6;
    case Stage::evaluate: return 7;
  }
  return 1;
}

void write_text_report(const std::string& path, const CalibrateResult& result) {
  std::ofstream out(path);
  const CalibrateReport& r = result.report;
  out << "radar-autocal calibration report\n";
  out << "=================================\n";
  out << "frames: " << r.n_frames << ", targets: " << r.n_targets
      << ", moving: " << r.n_moving_targets << "\n";
  out << "clusters: " << r.n_clusters << ", tracks: " << r.n_tracks
      << ", smoothed: " << r.n_smoothed_tracks << ", hypotheses: " << r.n_hypotheses << "\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "ground plane: roll %.3f deg, pitch %.3f deg (%zu points)\n",
                r.ground_roll_deg, r.ground_pitch_deg, r.n_ground_points);
  out << buf;
  out << "\nhypothesis clusters (translation-grouped):\n";
  out << "  sel  members  mean_angle_deg  mean_rms_m  mean_t\n";
  for (const auto& c : r.clusters) {
    std::snprintf(buf, sizeof(buf), "  %-4s %-8zu %-15.4f %-11.4f [%.2f, %.2f, %.2f]\n",
                  c.selected ? "*" : "", c.members, c.mean_angle_deg, c.mean_rms_m,
                  c.mean_t.x(), c.mean_t.y(), c.mean_t.z());
    out << buf;
  }
  const Eigen::Vector3d rpy = rotation_to_euler(result.calibration.R);
  std::snprintf(buf, sizeof(buf),
                "\nresult: t = [%.3f, %.3f, %.3f], rpy = [%.3f, %.3f, %.3f] deg\n",
                result.calibration.t.x(), result.calibration.t.y(), result.calibration.t.z(),
                rad2deg(rpy.x()), rad2deg(rpy.y()), rad2deg(rpy.z()));
  out << buf;
  std::snprintf(buf, sizeof(buf), "residual rms: %.4f m, refined: %s\n",
                result.calibration.residual_rms_m,
                result.calibration.refined ? "yes" : "no");
  out << buf;
  if (r.refinement_applied) {
    std::snprintf(buf, sizeof(buf), "refinement offset: %.3f m\n", r.refine_offset_m);
    out << buf;
  }
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
}

int cmd_calibrate(const std::string& radar_path, const std::string& pose_path,
                  const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_dir) {
  PipelineConfig cfg = load_pipeline_config(config_path, overrides);

  std::vector<RadarFrame> radar;
  PoseTrack poses;
  try {
    radar = read_radar_log(radar_path);
    poses = read_pose_log(pose_path);
  } catch (const Error& e) {
    std::cerr << "[ingest] " << e.what() << "\n";
    return 2;
  }

  const CalibrateResult result = run_calibrate(radar, poses, cfg);

  fs::create_directories(out_dir);
  write_calibration((fs::path(out_dir) / "calibration.json").string(), result.calibration);
  write_calibrate_report((fs::path(out_dir) / "report.json").string(), result);
  write_text_report((fs::path(out_dir) / "report.txt").string(), result);

  std::cout << "calibration written to " << (fs::path(out_dir) / "calibration.json").string()
            << " (residual " << result.calibration.residual_rms_m << " m, "
            << result.report.n_hypotheses << " hypotheses)\n";
  return 0;
}

int cmd_evaluate(const std::string& radar_path, const std::string& pose_path,
                 const std::string& calib_path, const std::string& config_path,
                 const std::vector<std::string>& overrides, const std::string& out_dir) {
  PipelineConfig cfg = load_pipeline_config(config_path, overrides);

  std::vector<RadarFrame> radar;
  PoseTrack poses;
  Calibration calib;
  try {
    radar = read_radar_log(radar_path);
    poses = read_pose_log(pose_path);
    calib = read_calibration(calib_path);
  } catch (const Error& e) {
    std::cerr << "[ingest] " << e.what() << "\n";
    return 2;
  }

  const EvaluateResult result = run_evaluate(radar, poses, calib, cfg);

  fs::create_directories(out_dir);
  write_metrics_json((fs::path(out_dir) / "metrics.json").string(), result.metrics);
  write_diagnostics_csv((fs::path(out_dir) / "diagnostics.csv").string(), result.metrics);

  std::printf("r_i = %.2f %%, delta_op = %.3f m, delta_p = %.3f m (%zu targets, %zu tracks)\n",
              result.metrics.r_i_pct, result.metrics.delta_op_m, result.metrics.delta_p_m,
              result.metrics.n_targets, result.n_accepted);
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const ScenarioConfig cfg = load_scenario_config(scenario_path);
  const Scenario scenario = generate_scenario(cfg);
  fs::create_directories(out_dir);
  write_scenario_logs(scenario, (fs::path(out_dir) / "radar.jsonl").string(),
                      (fs::path(out_dir) / "pose.csv").string(),
                      (fs::path(out_dir) / "labels.csv").string());
  write_calibration((fs::path(out_dir) / "truth.json").string(), scenario.truth);
  std::cout << "scenario written to " << out_dir << " (" << scenario.frames.size()
            << " radar frames, " << scenario.poses.samples.size() << " pose samples)\n";
  return 0;
}

int cmd_inspect(const std::string& radar_path) {
  const std::vector<RadarFrame> frames = read_radar_log(radar_path);
  std::size_t n_targets = 0;
  double v_min = 0, v_max = 0, r_min = 0, r_max = 0;
  bool first = true;
  for (const auto& frame : frames) {
    for (const auto& tgt : frame.targets) {
      ++n_targets;
      const double r = tgt.p_sensor.norm();
      if (first) {
        v_min = v_max = tgt.v_rad;
        r_min = r_max = r;
        first = false;
      } else {
        v_min = std::min(v_min, tgt.v_rad);
        v_max = std::max(v_max, tgt.v_rad);
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
      }
    }
  }
  const double duration_s = seconds(frames.back().t - frames.front().t);
  nlohmann::ordered_json j;
  j["frames"] = frames.size();
  j["targets"] = n_targets;
  j["duration_s"] = duration_s;
  j["rate_hz"] = frames.size() > 1 ? (frames.size() - 1) / duration_s : 0.0;
  j["targets_per_frame"] = static_cast<double>(n_targets) / frames.size();
  j["v_rad_range_mps"] = {v_min, v_max};
  j["range_m"] = {r_min, r_max};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"automatic geo-referenced extrinsic calibration of roadside radars"};
  app.require_subcommand(1);

  std::string radar_path, pose_path, calib_path, config_path, scenario_path, out_dir;
  std::vector<std::string> overrides;

  auto* calibrate = app.add_subcommand("calibrate", "estimate a calibration from logs");
  calibrate->add_option("--radar", radar_path, "radar JSONL log")->required();
  calibrate->add_option("--pose", pose_path, "pose CSV log")->required();
  calibrate->add_option("--config", config_path, "pipeline config file");
  calibrate->add_option("--set", overrides, "override a config key (key=value)");
  calibrate->add_option("--out", out_dir, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "compute metrics on a held-out session");
  evaluate->add_option("--radar", radar_path, "radar JSONL log")->required();
  evaluate->add_option("--pose", pose_path, "pose CSV log")->required();
  evaluate->add_option("--calib", calib_path, "calibration.json")->required();
  evaluate->add_option("--config", config_path, "pipeline config file");
  evaluate->add_option("--set", overrides, "override a config key (key=value)");
  evaluate->add_option("--out", out_dir, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario");
  simulate->add_option("--scenario", scenario_path, "scenario config file")->required();
  simulate->add_option("--out", out_dir, "output directory")->required();

  auto* inspect = app.add_subcommand("inspect", "summarize a radar log");
  inspect->add_option("--radar", radar_path, "radar JSONL log")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed())
      return cmd_calibrate(radar_path, pose_path, config_path, overrides, out_dir);
    if (evaluate->parsed())
      return cmd_evaluate(radar_path, pose_path, calib_path, config_path, overrides, out_dir);
    if (simulate->parsed()) return cmd_simulate(scenario_path, out_dir);
    if (inspect->parsed()) return cmd_inspect(radar_path);
  } catch (const StageError& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.stage());
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    // Errors outside the staged pipeline: I/O and schema problems map to
    // the ingest code, anything else is a generic failure.
    return e.code() == ErrorCode::io_failure || e.code() == ErrorCode::bad_schema ||
                   e.code() == ErrorCode::parse_failure || e.code() == ErrorCode::empty_input
               ? 2
               : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
