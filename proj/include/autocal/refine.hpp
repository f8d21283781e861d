#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "autocal/cluster.hpp"
#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/hypothesis.hpp"
#include "autocal/ingest.hpp"
#include "autocal/nelder_mead.hpp"
#include "autocal/track.hpp"

namespace autocal {

/// Ground projection of the vehicle bounding box, counter-clockwise.
struct VehicleFootprint {
  std::array<Eigen::Vector2d, 4> corners;
  TimeUs t = 0;
};

struct PlanarOffset {
  double dx = 0.0;
  double dy = 0.0;
  bool converged = true;
};

/// Footprint at a pose: box center = position + yaw-rotated ref_offset,
/// corners ordered counter-clockwise for every yaw.
inline VehicleFootprint vehicle_footprint(const VehiclePose& pose, const VehicleDims& dims) {
  const double yaw = pose.rpy.z();
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto rot = [&](double x, double y) -> Eigen::Vector2d {
    return {c * x - s * y, s * x + c * y};
  };
  const Eigen::Vector2d center =
      pose.p_world.head<2>() + rot(dims.ref_offset.x(), dims.ref_offset.y());
  const double hl = dims.length / 2.0, hw = dims.width / 2.0;
  VehicleFootprint fp;
  fp.t = pose.t;
  fp.corners = {center + rot(hl, hw), center + rot(-hl, hw),
                center + rot(-hl, -hw), center + rot(hl, -hw)};
  return fp;
}

/// Boundary-inclusive point-in-convex-polygon test (1e-9 m slack).
inline bool inside_footprint(const Eigen::Vector2d& p, const VehicleFootprint& fp) {
  for (std::size_t i = 0; i < 4; ++i) {
    const Eigen::Vector2d& a = fp.corners[i];
    const Eigen::Vector2d& b = fp.corners[(i + 1) % 4];
    const Eigen::Vector2d e = b - a;
    const double cross = e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
    if (cross < -1e-9 * e.norm()) return false;
  }
  return true;
}

/// Zero for points inside or on the polygon; otherwise the distance to
/// the nearest polygon vertex.
inline double polygon_loss(const Eigen::Vector2d& p, const VehicleFootprint& fp) {
  if (inside_footprint(p, fp)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& corner : fp.corners) best = std::min(best, (corner - p).norm());
  return best;
}

/// One target/footprint pair for the containment optimization.
struct RefinePair {
  Eigen::Vector2d target_xy = Eigen::Vector2d::Zero();
  VehicleFootprint fp;
};

/// Minimizes the accumulated polygon loss of (target + offset) over all
/// pairs with Nelder-Mead. Never returns an offset worse than the initial
/// one; converged=false flags an iteration-cap exit.
inline PlanarOffset optimize_planar_offset(const std::vector<RefinePair>& pairs,
                                           const Eigen::Vector2d& init = Eigen::Vector2d::Zero()) {
  if (pairs.empty()) fail(ErrorCode::empty_input, "optimize_planar_offset: no pairs");
  auto loss = [&](const Eigen::VectorXd& offset) {
    double sum = 0.0;
    const Eigen::Vector2d o = offset.head<2>();
    for (const auto& pair : pairs) sum += polygon_loss(pair.target_xy + o, pair.fp);
    return sum;
  };
  const NelderMeadResult r = nelder_mead(loss, init);
  return {r.x(0), r.x(1), r.converged};
}

/// Closest point of the footprint rectangle to an external point: clamp
/// into the box in the footprint's local frame. For a point inside a
/// corner quadrant this is that corner.
inline Eigen::Vector2d closest_footprint_point(const Eigen::Vector2d& p,
                                               const VehicleFootprint& fp) {
  const Eigen::Vector2d center =
      0.25 * (fp.corners[0] + fp.corners[1] + fp.corners[2] + fp.corners[3]);
  const Eigen::Vector2d ax = (fp.corners[0] - fp.corners[1]).normalized();  // +length
  const Eigen::Vector2d ay = (fp.corners[0] - fp.corners[3]).normalized();  // +width
  const double hl = 0.5 * (fp.corners[0] - fp.corners[1]).norm();
  const double hw = 0.5 * (fp.corners[0] - fp.corners[3]).norm();
  const Eigen::Vector2d d = p - center;
  const double lx = std::clamp(d.dot(ax), -hl, hl);
  const double ly = std::clamp(d.dot(ay), -hw, hw);
  return center + lx * ax + ly * ay;
}

/// Second-pass correspondence: per cluster observation, the member target
/// closest to the sensor paired with the vehicle contour point closest to
/// the estimated sensor position (the nearest corner when the sensor sits
/// in a corner quadrant).
struct NearestSample {
  TimeUs t = 0;
  int track_id = 0;
  std::size_t obs_idx = 0;
  Eigen::Vector3d p_sensor_raw = Eigen::Vector3d::Zero();
  Eigen::Vector2d target_world_xy = Eigen::Vector2d::Zero();
  Eigen::Vector2d corner_xy = Eigen::Vector2d::Zero();
  double pose_z = 0.0;
  VehicleFootprint fp;
};

inline std::vector<NearestSample> nearest_target_correspondences(
    const std::vector<RadarFrame>& frames, const Calibration& calib,
    const std::vector<ObjectTrack>& tracks, const PoseTrack& poses, const VehicleDims& dims,
    TimeUs max_dt_us, PoseInterp interp = PoseInterp::interpolate) {
  std::vector<NearestSample> samples;
  const Eigen::Vector2d sensor_xy = calib.t.head<2>();

  for (const auto& track : tracks) {
    std::vector<NearestSample> track_samples;
    for (std::size_t k = 0; k < track.observations.size(); ++k) {
      const TargetCluster& obs = track.observations[k];
      if (obs.members.empty()) continue;

      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }

      // Member target closest to the sensor (range in the sensor frame;
      // the calibration is rigid, so this is also the closest in world).
      const RadarTarget* nearest = nullptr;
      double best_range = 0.0;
      for (const auto& m : obs.members) {
        const RadarTarget& tgt = frames[m.frame_idx].targets[m.target_idx];
        const double range = tgt.p_sensor.norm();
        if (!nearest || range < best_range) {
          nearest = &tgt;
          best_range = range;
        }
      }

      const VehicleFootprint fp = vehicle_footprint(pose, dims);

      NearestSample sample;
      sample.t = obs.t;
      sample.track_id = track.id;
      sample.obs_idx = k;
      sample.p_sensor_raw = nearest->p_sensor;
      sample.target_world_xy = apply_calibration(calib, nearest->p_sensor).head<2>();
      sample.corner_xy = closest_footprint_point(sensor_xy, fp);
      sample.pose_z = pose.p_world.z();
      sample.fp = fp;
      track_samples.push_back(sample);
    }
    if (track_samples.size() < 3) continue;  // too little overlap left
    samples.insert(samples.end(), track_samples.begin(), track_samples.end());
  }
  return samples;
}

namespace detail {

/// Mean polygon loss of all member targets of the given tracks under a
/// calibration; the guard metric deciding whether refinement is accepted.
inline double mean_member_loss(const std::vector<RadarFrame>& frames, const Calibration& calib,
                               const std::vector<ObjectTrack>& tracks, const PoseTrack& poses,
                               const VehicleDims& dims, TimeUs max_dt_us, PoseInterp interp) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& track : tracks) {
    for (const auto& obs : track.observations) {
      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }
      const VehicleFootprint fp = vehicle_footprint(pose, dims);
      for (const auto& m : obs.members) {
        const RadarTarget& tgt = frames[m.frame_idx].targets[m.target_idx];
        sum += polygon_loss(apply_calibration(calib, tgt.p_sensor).head<2>(), fp);
        ++count;
      }
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace detail

/// Result refinement: nearest-to-sensor targets are re-smoothed per track,
/// the translation is re-estimated against the nearest vehicle corners
/// (the rotation is deliberately kept fixed), and a final 2D offset is
/// fitted with Nelder-Mead to pull targets into the vehicle footprints.
/// If the mean polygon loss on the calibration data would increase, the
/// input calibration is returned unchanged with refined=false.
inline Calibration refine_calibration(const Calibration& calib,
                                      const std::vector<RadarFrame>& frames,
                                      const std::vector<ObjectTrack>& tracks,
                                      const PoseTrack& poses, const VehicleDims& dims,
                                      const NoiseSpec& noise, TimeUs max_dt_us,
                                      PoseInterp interp = PoseInterp::interpolate,
                                      std::size_t min_track_len = 5) {
  const std::vector<NearestSample> samples =
      nearest_target_correspondences(frames, calib, tracks, poses, dims, max_dt_us, interp);
  if (samples.empty())
    fail(ErrorCode::insufficient_overlap, "refine_calibration: no usable correspondences");

  const Eigen::Matrix3d R_reg = calib.R * calib.R_level.transpose();

  // Re-smooth the nearest-target trajectory of each track, then collect
  // (smoothed leveled point, nearest contour point) correspondences.
  std::vector<Correspondence> corrs;
  for (const auto& track : tracks) {
    std::vector<TimeUs> times;
    std::vector<Eigen::Vector2d> xy;
    std::vector<const NearestSample*> row;
    for (const auto& s : samples) {
      if (s.track_id != track.id) continue;
      const Eigen::Vector3d leveled = calib.R_level * s.p_sensor_raw;
      times.push_back(s.t);
      xy.push_back(leveled.head<2>());
      row.push_back(&s);
    }
    if (times.size() < std::max<std::size_t>(min_track_len, 2)) continue;

    CtraFilterResult smoothed;
    try {
      smoothed = ctra_ukf_rts(times, xy, noise);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::numerical_failure || e.code() == ErrorCode::track_too_short)
        continue;
      throw;
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      Correspondence c;
      c.t = times[k];
      c.p_sensor_leveled = {smoothed.smoothed[k].state.x, smoothed.smoothed[k].state.y, 0.0};
      c.p_world = {row[k]->corner_xy.x(), row[k]->corner_xy.y(), row[k]->pose_z};
      corrs.push_back(c);
    }
  }
  if (corrs.size() < 3)
    fail(ErrorCode::insufficient_overlap, "refine_calibration: fewer than 3 correspondences");

  // Translation-only re-estimation in the ground plane; the rotation and
  // the vertical component stay untouched (the contour correspondences
  // carry no usable height information).
  Eigen::Vector3d t_new = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) t_new += c.p_world - R_reg * c.p_sensor_leveled;
  t_new /= static_cast<double>(corrs.size());
  t_new.z() = calib.t.z();

  // Containment polish: 2D offset applied after the calibration transform,
  // fitted over every member target so it optimizes the same containment
  // measure the acceptance guard checks.
  Calibration candidate = calib;
  candidate.t = t_new;
  std::vector<RefinePair> pairs;
  for (const auto& track : tracks) {
    for (const auto& obs : track.observations) {
      VehiclePose pose;
      try {
        pose = pose_at(poses, obs.t, max_dt_us, interp);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_pose_available) continue;
        throw;
      }
      const VehicleFootprint fp = vehicle_footprint(pose, dims);
      for (const auto& m : obs.members)
        pairs.push_back(
            {apply_calibration(candidate, frames[m.frame_idx].targets[m.target_idx].p_sensor)
                 .head<2>(),
             fp});
    }
  }
  const PlanarOffset offset = optimize_planar_offset(pairs);

  Calibration refined = calib;
  refined.t = t_new + Eigen::Vector3d(offset.dx, offset.dy, 0.0);
  refined.refined = true;
  {
    double ss = 0.0;
    for (const auto& c : corrs)
      ss += (R_reg * c.p_sensor_leveled + refined.t - c.p_world).squaredNorm();
    refined.residual_rms_m = std::sqrt(ss / static_cast<double>(corrs.size()));
  }

  // Guard: the correction is kept only when it strictly improves the
  // containment of the calibration data; otherwise (including the case
  // where everything already fits) the input calibration stands.
  const double loss_before =
      detail::mean_member_loss(frames, calib, tracks, poses, dims, max_dt_us, interp);
  const double loss_after =
      detail::mean_member_loss(frames, refined, tracks, poses, dims, max_dt_us, interp);
  if (!(loss_after < loss_before - 1e-12)) {
    Calibration unchanged = calib;
    unchanged.refined = false;
    return unchanged;
  }
  return refined;
}

}  // namespace autocal
