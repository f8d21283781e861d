#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/groundplane.hpp"
#include "autocal/ingest.hpp"
#include "autocal/track.hpp"

namespace autocal {

/// Timestamped 3D point pair: leveled sensor frame vs origin-shifted UTM.
struct Correspondence {
  TimeUs t = 0;
  Eigen::Vector3d p_sensor_leveled = Eigen::Vector3d::Zero();
  Eigen::Vector3d p_world = Eigen::Vector3d::Zero();
  double weight = 1.0;
};

/// Candidate rigid transform estimated from one track.
struct CalibrationHypothesis {
  int track_id = 0;
  std::vector<Correspondence> correspondences;
  Eigen::Matrix3d R_h = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_h = Eigen::Vector3d::Zero();
  double rms_residual = 0.0;
};

/// DBSCAN cluster of hypotheses in translation space.
struct HypothesisCluster {
  std::vector<CalibrationHypothesis> members;
  Eigen::Vector3d mean_t = Eigen::Vector3d::Zero();
  double mean_pairwise_angle = 0.0;

  double mean_rms() const {
    double sum = 0.0;
    for (const auto& h : members) sum += h.rms_residual;
    return members.empty() ? 0.0 : sum / static_cast<double>(members.size());
  }
};

/// Elevation source for the sensor-side correspondence point: zero, or
/// the pre-smoothing leveled centroid z.
enum class ElevationMode { zero, raw };

/// Pairs each smoothed state with the interpolated vehicle pose at its
/// timestamp. States with no pose within max_dt are skipped; fewer than 3
/// surviving pairs is an insufficient-overlap error.
inline std::vector<Correspondence> build_correspondences(
    const SmoothedTrack& track, const PoseTrack& poses, ElevationMode mode, TimeUs max_dt_us,
    PoseInterp interp = PoseInterp::interpolate) {
  std::vector<Correspondence> corrs;
  for (std::size_t k = 0; k < track.states.size(); ++k) {
    VehiclePose pose;
    try {
      pose = pose_at(poses, track.states[k].t, max_dt_us, interp);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::no_pose_available) continue;
      throw;
    }
    Correspondence c;
    c.t = track.states[k].t;
    const double z = mode == ElevationMode::zero ? 0.0 : track.leveled_z[k];
    c.p_sensor_leveled = {track.states[k].state.x, track.states[k].state.y, z};
    c.p_world = pose.p_world;
    corrs.push_back(c);
  }
  if (corrs.size() < 3)
    fail(ErrorCode::insufficient_overlap,
         "track " + std::to_string(track.id) + ": only " + std::to_string(corrs.size()) +
             " correspondences overlap the pose track");
  return corrs;
}

struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double rms_residual = 0.0;
};

/// Weighted least-squares rigid transform (rotation + translation, no
/// scale) minimizing sum w_i |R p_s,i + t - p_w,i|^2, via centroid
/// subtraction and SVD of the cross-covariance with determinant-sign
/// correction. Near-collinear sensor-side geometry is rejected: a straight
/// pass does not constrain the rotation about the path axis.
inline RigidTransform estimate_rigid_transform(const std::vector<Correspondence>& corrs) {
  if (corrs.size() < 3)
    fail(ErrorCode::degenerate_geometry, "estimate_rigid_transform: need >= 3 pairs");

  double W = 0.0;
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cw = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) {
    if (!(c.weight > 0) || c.weight > 1.0)
      fail(ErrorCode::invalid_argument, "correspondence weight must be in (0, 1]");
    W += c.weight;
    cs += c.weight * c.p_sensor_leveled;
    cw += c.weight * c.p_world;
  }
  cs /= W;
  cw /= W;

  // Collinearity check on the centered sensor-side points.
  Eigen::MatrixXd centered(corrs.size(), 3);
  for (std::size_t i = 0; i < corrs.size(); ++i)
    centered.row(i) = (corrs[i].p_sensor_leveled - cs).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> shape_svd(centered);
  const Eigen::Vector3d shape_sv = shape_svd.singularValues();
  if (shape_sv(1) <= 0 || shape_sv(0) / shape_sv(1) > 100.0)
    fail(ErrorCode::degenerate_geometry,
         "estimate_rigid_transform: sensor-side points are near-collinear");

  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (const auto& c : corrs)
    H += c.weight * (c.p_sensor_leveled - cs) * (c.p_world - cw).transpose();

  double z_spread = 0.0;
  for (const auto& c : corrs)
    z_spread = std::max(z_spread, std::abs(c.p_sensor_leveled.z() - cs.z()));

  RigidTransform result;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();

  if (z_spread <= 1e-9 * std::max(1.0, shape_sv(0))) {
    // Sensor-side points share one elevation (zero-elevation mode), so the
    // vertical axis is unconstrained and SVD sign conventions could flip
    // it. Both frames are z-up here: solve the 2D problem, map +z to +z.
    const Eigen::Matrix2d H2 = H.topLeftCorner<2, 2>();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd2(H2, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double d2 =
        (svd2.matrixV() * svd2.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    if (d2 < 0 && svd2.singularValues()(0) - svd2.singularValues()(1) <=
                      1e-9 * std::max(svd2.singularValues()(0), 1e-300))
      fail(ErrorCode::degenerate_geometry,
           "estimate_rigid_transform: reflection-degenerate planar spectrum");
    result.R.setIdentity();
    result.R.topLeftCorner<2, 2>() =
        svd2.matrixV() * Eigen::Vector2d(1, d2).asDiagonal() * svd2.matrixU().transpose();
  } else {
    const double d = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    if (d < 0 && sv(1) - sv(2) <= 1e-9 * std::max(sv(0), 1e-300))
      fail(ErrorCode::degenerate_geometry,
           "estimate_rigid_transform: reflection-degenerate spectrum");
    result.R = svd.matrixV() * Eigen::Vector3d(1, 1, d).asDiagonal() * svd.matrixU().transpose();
  }
  result.t = cw - result.R * cs;

  double ss = 0.0;
  for (const auto& c : corrs)
    ss += c.weight * (result.R * c.p_sensor_leveled + result.t - c.p_world).squaredNorm();
  result.rms_residual = std::sqrt(ss / W);
  return result;
}

/// Builds a hypothesis from one smoothed track.
inline CalibrationHypothesis make_hypothesis(int track_id, std::vector<Correspondence> corrs) {
  const RigidTransform rt = estimate_rigid_transform(corrs);
  CalibrationHypothesis h;
  h.track_id = track_id;
  h.correspondences = std::move(corrs);
  h.R_h = rt.R;
  h.t_h = rt.t;
  h.rms_residual = rt.rms_residual;
  return h;
}

/// Groups hypotheses by their translation vector with plain-Euclidean
/// DBSCAN and computes per-cluster statistics. Zero clusters means no two
/// vehicle passes agreed on a sensor position.
inline std::vector<HypothesisCluster> cluster_hypotheses(
    const std::vector<CalibrationHypothesis>& hyps, double eps_t = 1.0, std::size_t min_pts = 2) {
  std::vector<HypothesisCluster> out;
  if (!hyps.empty()) {
    auto dist = [&](std::size_t i, std::size_t j) { return (hyps[i].t_h - hyps[j].t_h).norm(); };
    const DbscanResult db = dbscan(hyps.size(), dist, eps_t, min_pts);

    out.resize(db.n_clusters);
    for (std::size_t i = 0; i < hyps.size(); ++i)
      if (db.labels[i] >= 0) out[db.labels[i]].members.push_back(hyps[i]);
    out.erase(std::remove_if(out.begin(), out.end(),
                             [&](const HypothesisCluster& c) { return c.members.size() < min_pts; }),
              out.end());

    for (auto& cluster : out) {
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      for (const auto& h : cluster.members) sum += h.t_h;
      cluster.mean_t = sum / static_cast<double>(cluster.members.size());

      double angle_sum = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < cluster.members.size(); ++i)
        for (std::size_t j = i + 1; j < cluster.members.size(); ++j) {
          angle_sum += rotation_error_angle(cluster.members[i].R_h, cluster.members[j].R_h);
          ++pairs;
        }
      cluster.mean_pairwise_angle = pairs > 0 ? angle_sum / static_cast<double>(pairs) : 0.0;
    }
  }
  if (out.empty())
    fail(ErrorCode::insufficient_consistent_passes,
         "no hypothesis cluster found (need >= " + std::to_string(min_pts) +
             " passes agreeing on the sensor position)");
  return out;
}

/// The cluster with the lowest mean pairwise rotation angle wins; ties go
/// to the larger cluster, then to the lower mean residual.
inline HypothesisCluster select_hypothesis_cluster(
    const std::vector<HypothesisCluster>& clusters) {
  if (clusters.empty()) fail(ErrorCode::invalid_argument, "no clusters to select from");
  const HypothesisCluster* best = &clusters.front();
  for (const auto& c : clusters) {
    if (c.mean_pairwise_angle < best->mean_pairwise_angle) {
      best = &c;
    } else if (c.mean_pairwise_angle == best->mean_pairwise_angle) {
      if (c.members.size() > best->members.size() ||
          (c.members.size() == best->members.size() && c.mean_rms() < best->mean_rms()))
        best = &c;
    }
  }
  return *best;
}

/// Re-estimates the transform from the concatenated correspondences of the
/// selected cluster and composes it with the leveling rotation:
/// p_world = R_reg (R_level p_sensor) + t_reg.
inline Calibration finalize_calibration(const HypothesisCluster& selected,
                                        const GroundPlane& ground, const UtmOrigin& origin) {
  std::vector<Correspondence> merged;
  for (const auto& h : selected.members)
    merged.insert(merged.end(), h.correspondences.begin(), h.correspondences.end());

  const RigidTransform rt = estimate_rigid_transform(merged);

  Calibration calib;
  calib.R = rt.R * ground.R_level;
  calib.t = rt.t;
  calib.R_level = ground.R_level;
  calib.origin = origin;
  calib.residual_rms_m = rt.rms_residual;
  calib.n_hypotheses = static_cast<int>(selected.members.size());
  calib.refined = false;
  return calib;
}

}  // namespace autocal
