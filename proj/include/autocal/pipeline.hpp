#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "autocal/calibration_io.hpp"
#include "autocal/cluster.hpp"
#include "autocal/config.hpp"
#include "autocal/error.hpp"
#include "autocal/eval.hpp"
#include "autocal/groundplane.hpp"
#include "autocal/hypothesis.hpp"
#include "autocal/ingest.hpp"
#include "autocal/refine.hpp"
#include "autocal/track.hpp"

namespace autocal {

enum class Stage { ingest, cluster, groundplane, hypothesis, refine, evaluate };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::cluster: return "cluster";
    case Stage::groundplane: return "groundplane";
    case Stage::hypothesis: return "hypothesis";
    case Stage::refine: return "refine";
    case Stage::evaluate: return "evaluate";
  }
  return "unknown";
}

/// Error annotated with the pipeline stage it came from, for exit codes.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& inner)
      : Error(inner.code(), std::string("[") + to_string(stage) + "] " + inner.what()),
        stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct HypothesisClusterSummary {
  Eigen::Vector3d mean_t;
  std::size_t members = 0;
  double mean_angle_deg = 0.0;
  double mean_rms_m = 0.0;
  bool selected = false;
};

/// Machine-readable run summary, written next to calibration.json.
struct CalibrateReport {
  std::size_t n_frames = 0;
  std::size_t n_targets = 0;
  std::size_t n_moving_targets = 0;
  std::size_t n_clusters = 0;
  std::size_t n_tracks = 0;
  std::size_t n_smoothed_tracks = 0;
  std::size_t n_hypotheses = 0;
  std::size_t n_ground_points = 0;
  Eigen::Vector3d ground_normal = Eigen::Vector3d::UnitZ();
  double ground_roll_deg = 0.0;
  double ground_pitch_deg = 0.0;
  std::vector<HypothesisClusterSummary> clusters;
  bool refinement_applied = false;
  double refine_offset_m = 0.0;
  std::vector<std::string> warnings;
  double runtime_ms = 0.0;
};

struct CalibrateResult {
  Calibration calibration;  // final (refined when accepted)
  Calibration unrefined;    // pre-refinement result
  CalibrateReport report;
};

namespace detail {

template <typename Fn>
auto run_stage(Stage stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

}  // namespace detail

/// Runs stages 1-6: moving-target filter, windowed clustering and
/// association, ground-plane leveling, track smoothing, hypothesis
/// generation/filtering, and refinement.
inline CalibrateResult run_calibrate(const std::vector<RadarFrame>& radar, const PoseTrack& poses,
                                     const PipelineConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  CalibrateResult result;
  CalibrateReport& report = result.report;

  // Stage 1: clutter filter + clustering + association.
  std::vector<RadarFrame> moving(radar.size());
  std::vector<ObjectTrack> tracks;
  detail::run_stage(Stage::cluster, [&] {
    report.n_frames = radar.size();
    for (std::size_t k = 0; k < radar.size(); ++k) {
      report.n_targets += radar[k].targets.size();
      moving[k] = filter_moving(radar[k], cfg.cluster.v_min);
      report.n_moving_targets += moving[k].targets.size();
    }
    if (report.n_moving_targets == 0)
      fail(ErrorCode::empty_input, "no moving targets after the stationary filter");

    std::vector<std::vector<TargetCluster>> steps(moving.size());
    for (std::size_t k = 0; k < moving.size(); ++k) {
      const std::size_t begin = k + 1 >= cfg.cluster.window ? k + 1 - cfg.cluster.window : 0;
      steps[k] = cluster_window(moving, begin, k + 1, cfg.cluster);
      report.n_clusters += steps[k].size();
    }
    tracks = associate_tracks(steps, cfg.cluster.gate);
    report.n_tracks = tracks.size();
    return 0;
  });

  // Stage 2: ground plane.
  GroundPlane ground;
  detail::run_stage(Stage::groundplane, [&] {
    std::vector<Eigen::Vector3d> cloud;
    cloud.reserve(report.n_moving_targets);
    for (const auto& frame : moving)
      for (const auto& tgt : frame.targets) cloud.push_back(tgt.p_sensor);
    ground = estimate_ground(cloud, cfg.ground_radius_m, cfg.ground_keep_fraction);
    report.n_ground_points = cloud.size();
    report.ground_normal = ground.n;
    const Eigen::Vector3d rpy = rotation_to_euler(ground.R_level);
    report.ground_roll_deg = rad2deg(rpy.x());
    report.ground_pitch_deg = rad2deg(rpy.y());
    return 0;
  });

  // Stages 3-5: smoothing, hypothesis generation, filtering, selection.
  std::vector<SmoothedTrack> smoothed;
  std::vector<CalibrationHypothesis> hypotheses;
  HypothesisCluster selected;
  detail::run_stage(Stage::hypothesis, [&] {
    for (const auto& track : tracks) {
      if (track.observations.size() < cfg.min_track_length) continue;
      try {
        smoothed.push_back(smooth_track(track, ground, cfg.noise, cfg.min_track_length));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::numerical_failure) {
          report.warnings.push_back("track " + std::to_string(track.id) +
                                    " smoothing failed: " + e.what());
          continue;
        }
        throw;
      }
    }
    report.n_smoothed_tracks = smoothed.size();

    for (const auto& st : smoothed) {
      try {
        std::vector<Correspondence> corrs =
            build_correspondences(st, poses, cfg.elevation_mode, cfg.max_dt_us, cfg.pose_mode);
        hypotheses.push_back(make_hypothesis(st.id, std::move(corrs)));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::insufficient_overlap ||
            e.code() == ErrorCode::degenerate_geometry) {
          report.warnings.push_back("track " + std::to_string(st.id) +
                                    " skipped: " + e.what());
          continue;
        }
        throw;
      }
    }
    report.n_hypotheses = hypotheses.size();

    const std::vector<HypothesisCluster> clusters =
        cluster_hypotheses(hypotheses, cfg.hyp_eps_t_m, cfg.hyp_min_pts);
    selected = select_hypothesis_cluster(clusters);
    for (const auto& c : clusters) {
      HypothesisClusterSummary s;
      s.mean_t = c.mean_t;
      s.members = c.members.size();
      s.mean_angle_deg = rad2deg(c.mean_pairwise_angle);
      s.mean_rms_m = c.mean_rms();
      s.selected = c.mean_t == selected.mean_t && c.members.size() == selected.members.size();
      report.clusters.push_back(s);
    }
    result.unrefined = finalize_calibration(selected, ground, poses.origin);
    return 0;
  });
  result.calibration = result.unrefined;

  // Stage 6: refinement.
  if (cfg.refine_enabled) {
    detail::run_stage(Stage::refine, [&] {
      std::vector<ObjectTrack> member_tracks;
      for (const auto& h : selected.members)
        for (const auto& track : tracks)
          if (track.id == h.track_id) member_tracks.push_back(track);
      const Calibration refined =
          refine_calibration(result.unrefined, moving, member_tracks, poses, cfg.dims, cfg.noise,
                             cfg.max_dt_us, cfg.pose_mode, cfg.min_track_length);
      report.refinement_applied = refined.refined;
      if (refined.refined)
        report.refine_offset_m = (refined.t.head<2>() - result.unrefined.t.head<2>()).norm();
      else
        report.warnings.push_back("refinement rejected: containment loss did not improve");
      result.calibration = refined;
      return 0;
    });
  }

  report.runtime_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t_start).count();
  return result;
}

struct EvaluateResult {
  Metrics metrics;
  std::size_t n_tracks = 0;
  std::size_t n_accepted = 0;
};

/// Evaluation pass: clustering + tracking only, then the paper metrics
/// against the interpolated vehicle footprints.
inline EvaluateResult run_evaluate(const std::vector<RadarFrame>& radar, const PoseTrack& poses,
                                   const Calibration& calib, const PipelineConfig& cfg) {
  EvaluateResult result;

  std::vector<RadarFrame> moving(radar.size());
  std::vector<ObjectTrack> tracks;
  detail::run_stage(Stage::cluster, [&] {
    for (std::size_t k = 0; k < radar.size(); ++k)
      moving[k] = filter_moving(radar[k], cfg.cluster.v_min);
    std::vector<std::vector<TargetCluster>> steps(moving.size());
    for (std::size_t k = 0; k < moving.size(); ++k) {
      const std::size_t begin = k + 1 >= cfg.cluster.window ? k + 1 - cfg.cluster.window : 0;
      steps[k] = cluster_window(moving, begin, k + 1, cfg.cluster);
    }
    tracks = associate_tracks(steps, cfg.cluster.gate);
    result.n_tracks = tracks.size();
    return 0;
  });

  detail::run_stage(Stage::evaluate, [&] {
    const std::vector<ObjectTrack> accepted = associate_eval_tracks(
        tracks, poses, calib, cfg.eval_reject_threshold_m, cfg.max_dt_us, cfg.pose_mode);
    result.n_accepted = accepted.size();
    result.metrics =
        compute_metrics(accepted, moving, poses, cfg.dims, calib, cfg.max_dt_us, cfg.pose_mode);
    return 0;
  });

  return result;
}

/// Report JSON; the timestamp field is excluded from determinism checks.
inline void write_calibrate_report(const std::string& path, const CalibrateResult& result) {
  const CalibrateReport& r = result.report;
  nlohmann::ordered_json j;
  j["schema"] = 1;
  {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    j["timestamp"] = buf;
  }
  j["counts"] = {{"frames", r.n_frames},
                 {"targets", r.n_targets},
                 {"moving_targets", r.n_moving_targets},
                 {"clusters", r.n_clusters},
                 {"tracks", r.n_tracks},
                 {"smoothed_tracks", r.n_smoothed_tracks},
                 {"hypotheses", r.n_hypotheses},
                 {"ground_points", r.n_ground_points}};
  j["ground"] = {{"normal", {r.ground_normal.x(), r.ground_normal.y(), r.ground_normal.z()}},
                 {"roll_deg", r.ground_roll_deg},
                 {"pitch_deg", r.ground_pitch_deg}};
  auto& clusters = j["hypothesis_clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : r.clusters) {
    clusters.push_back({{"mean_t", {c.mean_t.x(), c.mean_t.y(), c.mean_t.z()}},
                        {"members", c.members},
                        {"mean_pairwise_angle_deg", c.mean_angle_deg},
                        {"mean_rms_m", c.mean_rms_m},
                        {"selected", c.selected}});
  }
  j["refinement"] = {{"applied", r.refinement_applied}, {"offset_m", r.refine_offset_m}};
  j["result"] = {{"t", {result.calibration.t.x(), result.calibration.t.y(),
                        result.calibration.t.z()}},
                 {"residual_rms_m", result.calibration.residual_rms_m},
                 {"refined", result.calibration.refined}};
  j["warnings"] = r.warnings;
  j["runtime_ms"] = r.runtime_ms;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write report: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace autocal
