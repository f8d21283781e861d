#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autocal/cluster.hpp"
#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/ingest.hpp"
#include "autocal/refine.hpp"

namespace autocal {

struct PerTargetDiag {
  TimeUs t = 0;
  int track_id = 0;
  double range_m = 0.0;
  bool inside = false;
  double loss_m = 0.0;
  std::optional<double> delta_p_m;  // set on the per-cluster nearest-target row
};

/// Evaluation triple: inlier ratio r_i, mean outlier distance delta_op and
/// mean nearest-target/nearest-corner distance delta_p, plus per-target
/// diagnostics for range-vs-error analysis.
struct Metrics {
  double r_i_pct = 0.0;
  double delta_op_m = 0.0;
  double delta_p_m = 0.0;
  std::size_t n_targets = 0;
  std::size_t n_inliers = 0;
  std::vector<PerTargetDiag> per_target;
};

/// Keeps the tracks whose mean 2D centroid-to-pose distance in the world
/// frame is strictly below reject_threshold (bystander traffic exceeds
/// it). Tracks with no pose-covered observation are dropped.
inline std::vector<ObjectTrack> associate_eval_tracks(const std::vector<ObjectTrack>& tracks,
                                                      const PoseTrack& poses,
                                                      const Calibration& calib,
                                                      double reject_threshold, TimeUs max_dt_us,
                                                      PoseInterp interp = PoseInterp::interpolate) {
  std::vector<ObjectTrack> accepted;
  for (const auto& track : tracks) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& obs : track.observations) {
      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }
      const Eigen::Vector3d world = apply_calibration(calib, obs.centroid);
      sum += (world.head<2>() - pose.p_world.head<2>()).norm();
      ++count;
    }
    if (count == 0) continue;
    if (sum / static_cast<double>(count) < reject_threshold) accepted.push_back(track);
  }
  if (accepted.empty())
    fail(ErrorCode::insufficient_overlap, "no tracks accepted for evaluation");
  return accepted;
}

/// Computes the paper-style metrics over every member target of every
/// accepted cluster. A height gate excludes elevated clutter: targets
/// whose world z deviates from the track's median z offset (relative to
/// the pose altitude) by height + 0.5 m or more. The median reference
/// keeps the gate independent of the calibration's vertical datum, which
/// is road-plane-relative in zero-elevation mode.
inline Metrics compute_metrics(const std::vector<ObjectTrack>& accepted,
                               const std::vector<RadarFrame>& frames, const PoseTrack& poses,
                               const VehicleDims& dims, const Calibration& calib,
                               TimeUs max_dt_us, PoseInterp interp = PoseInterp::interpolate) {
  if (accepted.empty()) fail(ErrorCode::invalid_argument, "compute_metrics: no accepted tracks");

  Metrics metrics;
  double outlier_sum = 0.0;
  std::size_t outlier_count = 0;
  double delta_p_sum = 0.0;
  std::size_t delta_p_count = 0;
  const Eigen::Vector2d sensor_xy = calib.t.head<2>();

  for (const auto& track : accepted) {
    std::vector<double> dz;
    for (const auto& obs : track.observations) {
      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }
      for (const auto& m : obs.members)
        dz.push_back(
            apply_calibration(calib, frames[m.frame_idx].targets[m.target_idx].p_sensor).z() -
            pose.p_world.z());
    }
    if (dz.empty()) continue;
    std::nth_element(dz.begin(), dz.begin() + dz.size() / 2, dz.end());
    const double median_dz = dz[dz.size() / 2];

    for (const auto& obs : track.observations) {
      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }
      const VehicleFootprint fp = vehicle_footprint(pose, dims);

      const RadarTarget* nearest = nullptr;
      double nearest_range = 0.0;
      std::size_t nearest_diag_idx = 0;

      for (const auto& m : obs.members) {
        const RadarTarget& tgt = frames[m.frame_idx].targets[m.target_idx];
        const Eigen::Vector3d world = apply_calibration(calib, tgt.p_sensor);
        if (std::abs(world.z() - pose.p_world.z() - median_dz) >= dims.height + 0.5) continue;

        PerTargetDiag diag;
        diag.t = obs.t;
        diag.track_id = track.id;
        diag.range_m = tgt.p_sensor.norm();
        diag.loss_m = polygon_loss(world.head<2>(), fp);
        diag.inside = diag.loss_m == 0.0;
        ++metrics.n_targets;
        if (diag.inside) {
          ++metrics.n_inliers;
        } else {
          outlier_sum += diag.loss_m;
          ++outlier_count;
        }
        metrics.per_target.push_back(diag);

        if (!nearest || diag.range_m < nearest_range) {
          nearest = &tgt;
          nearest_range = diag.range_m;
          nearest_diag_idx = metrics.per_target.size() - 1;
        }
      }

      if (nearest) {
        std::size_t best_corner = 0;
        double best_d = (fp.corners[0] - sensor_xy).norm();
        for (std::size_t i = 1; i < 4; ++i) {
          const double d = (fp.corners[i] - sensor_xy).norm();
          if (d < best_d) {
            best_d = d;
            best_corner = i;
          }
        }
        const Eigen::Vector2d target_xy = apply_calibration(calib, nearest->p_sensor).head<2>();
        const double dp = (target_xy - fp.corners[best_corner]).norm();
        metrics.per_target[nearest_diag_idx].delta_p_m = dp;
        delta_p_sum += dp;
        ++delta_p_count;
      }
    }
  }
  }

  if (metrics.n_targets == 0)
    fail(ErrorCode::insufficient_overlap, "compute_metrics: no evaluable targets");

  metrics.r_i_pct =
      100.0 * static_cast<double>(metrics.n_inliers) / static_cast<double>(metrics.n_targets);
  metrics.delta_op_m = outlier_count > 0 ? outlier_sum / static_cast<double>(outlier_count) : 0.0;
  metrics.delta_p_m = delta_p_count > 0 ? delta_p_sum / static_cast<double>(delta_p_count) : 0.0;
  return metrics;
}

inline void write_metrics_json(const std::string& path, const Metrics& m) {
  nlohmann::ordered_json j;
  j["r_i_pct"] = m.r_i_pct;
  j["delta_op_m"] = m.delta_op_m;
  j["delta_p_m"] = m.delta_p_m;
  j["n_targets"] = m.n_targets;
  j["n_inliers"] = m.n_inliers;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write metrics: " + path);
  out << j.dump(2) << "\n";
}

inline void write_diagnostics_csv(const std::string& path, const Metrics& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write diagnostics: " + path);
  out << "t_us,track_id,range_m,inside,loss_m,delta_p_m\n";
  char buf[192];
  for (const auto& d : m.per_target) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.4f,%d,%.6f,", static_cast<long long>(d.t),
                  d.track_id, d.range_m, d.inside ? 1 : 0, d.loss_m);
    out << buf;
    if (d.delta_p_m) {
      std::snprintf(buf, sizeof(buf), "%.6f", *d.delta_p_m);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace autocal
