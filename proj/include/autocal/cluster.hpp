#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "autocal/dbscan.hpp"
#include "autocal/error.hpp"
#include "autocal/hungarian.hpp"
#include "autocal/types.hpp"

namespace autocal {

/// Tunables for clutter filtering, windowed clustering and association.
/// lambda_v converts radial-velocity differences into meters inside the
/// augmented DBSCAN metric.
struct ClusterParams {
  double v_min = 0.1 / 3.6;  // 0.1 km/h stationary threshold, in m/s
  double eps = 2.5;
  std::size_t min_pts = 3;
  double lambda_v = 1.0;
  std::size_t window = 3;
  double gate = 3.0;
};

/// Reference to a target inside the session's frame sequence.
struct TargetRef {
  std::size_t frame_idx = 0;
  std::size_t target_idx = 0;
  bool operator<(const TargetRef& o) const {
    return frame_idx != o.frame_idx ? frame_idx < o.frame_idx : target_idx < o.target_idx;
  }
  bool operator==(const TargetRef& o) const {
    return frame_idx == o.frame_idx && target_idx == o.target_idx;
  }
};

/// One DBSCAN cluster over a frame window. The timestamp is the newest
/// frame's; the centroid is the arithmetic mean of member positions.
struct TargetCluster {
  TimeUs t = 0;
  std::vector<TargetRef> members;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  double mean_v_rad = 0.0;
};

/// Temporally associated cluster sequence.
struct ObjectTrack {
  int id = 0;
  std::vector<TargetCluster> observations;
};

/// Keeps exactly the targets with |v_rad| >= v_min, preserving order.
inline RadarFrame filter_moving(const RadarFrame& frame, double v_min) {
  if (v_min < 0) fail(ErrorCode::invalid_argument, "v_min must be >= 0");
  RadarFrame out;
  out.t = frame.t;
  for (const auto& tgt : frame.targets)
    if (std::abs(tgt.v_rad) >= v_min) out.targets.push_back(tgt);
  return out;
}

/// Euclidean distance augmented with the radial-velocity difference:
/// sqrt(|pa - pb|^2 + lambda_v^2 (va - vb)^2).
inline double augmented_distance(const RadarTarget& a, const RadarTarget& b, double lambda_v) {
  const double dp2 = (a.p_sensor - b.p_sensor).squaredNorm();
  const double dv = lambda_v * (a.v_rad - b.v_rad);
  return std::sqrt(dp2 + dv * dv);
}

/// Clusters the union of all targets in frames[begin, end) with DBSCAN in
/// the velocity-augmented metric. Clusters smaller than min_pts are
/// dropped as noise. Member references carry absolute frame indices.
inline std::vector<TargetCluster> cluster_window(const std::vector<RadarFrame>& frames,
                                                 std::size_t begin, std::size_t end,
                                                 const ClusterParams& params) {
  if (begin >= end || end > frames.size())
    fail(ErrorCode::invalid_argument, "invalid window range");
  if (end - begin > params.window)
    fail(ErrorCode::invalid_argument, "window range exceeds configured window size");

  std::vector<TargetRef> refs;
  for (std::size_t f = begin; f < end; ++f)
    for (std::size_t k = 0; k < frames[f].targets.size(); ++k) refs.push_back({f, k});
  if (refs.empty()) return {};

  auto target = [&](std::size_t i) -> const RadarTarget& {
    return frames[refs[i].frame_idx].targets[refs[i].target_idx];
  };
  auto dist = [&](std::size_t i, std::size_t j) {
    return augmented_distance(target(i), target(j), params.lambda_v);
  };

  const DbscanResult db = dbscan(refs.size(), dist, params.eps, params.min_pts);

  std::vector<TargetCluster> clusters(db.n_clusters);
  for (auto& c : clusters) c.t = frames[end - 1].t;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (db.labels[i] < 0) continue;
    clusters[db.labels[i]].members.push_back(refs[i]);
  }

  std::vector<TargetCluster> out;
  for (auto& c : clusters) {
    if (c.members.size() < params.min_pts) continue;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double v_sum = 0.0;
    for (const auto& m : c.members) {
      const auto& tgt = frames[m.frame_idx].targets[m.target_idx];
      sum += tgt.p_sensor;
      v_sum += tgt.v_rad;
    }
    c.centroid = sum / static_cast<double>(c.members.size());
    c.mean_v_rad = v_sum / static_cast<double>(c.members.size());
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

inline double association_cost(const TargetCluster& a, const TargetCluster& b,
                               const Eigen::Matrix3d* R_level) {
  if (R_level) {
    const Eigen::Vector3d pa = *R_level * a.centroid;
    const Eigen::Vector3d pb = *R_level * b.centroid;
    return (pa.head<2>() - pb.head<2>()).norm();
  }
  return (a.centroid - b.centroid).norm();
}

}  // namespace detail

/// Associates per-timestamp cluster sets into tracks. Identities are first
/// propagated through shared window targets; conflicting or unlinked
/// clusters are resolved with a minimum-total-centroid-distance assignment
/// (Hungarian, padded with gate-cost dummies). Any link with centroid
/// distance above the gate is rejected and spawns a new track.
///
/// When R_level is given, association costs are measured in the leveled
/// 2D frame; otherwise in 3D.
inline std::vector<ObjectTrack> associate_tracks(const std::vector<std::vector<TargetCluster>>& steps,
                                                 double gate,
                                                 const Eigen::Matrix3d* R_level = nullptr) {
  std::vector<ObjectTrack> tracks;
  // Track index owning each cluster of the previous step.
  std::vector<int> prev_owner;
  std::vector<TargetCluster> prev_clusters;

  for (const auto& curr : steps) {
    std::vector<int> owner(curr.size(), -1);

    if (!prev_clusters.empty() && !curr.empty()) {
      // Phase 1: propagate ids through shared window targets.
      std::vector<int> candidate(curr.size(), -1);
      for (std::size_t i = 0; i < curr.size(); ++i) {
        std::set<TargetRef> mine(curr[i].members.begin(), curr[i].members.end());
        std::size_t best_shared = 0;
        double best_dist = 0.0;
        for (std::size_t j = 0; j < prev_clusters.size(); ++j) {
          std::size_t shared = 0;
          for (const auto& m : prev_clusters[j].members) shared += mine.count(m);
          if (shared == 0) continue;
          const double d = detail::association_cost(curr[i], prev_clusters[j], R_level);
          if (shared > best_shared || (shared == best_shared && d < best_dist)) {
            best_shared = shared;
            best_dist = d;
            candidate[i] = static_cast<int>(j);
          }
        }
      }

      // Keep only uniquely claimed predecessors; conflicts fall through to
      // the assignment step.
      std::map<int, std::vector<std::size_t>> claims;
      for (std::size_t i = 0; i < curr.size(); ++i)
        if (candidate[i] >= 0) claims[candidate[i]].push_back(i);
      std::vector<bool> prev_taken(prev_clusters.size(), false);
      for (const auto& [j, claimants] : claims) {
        if (claimants.size() != 1) continue;
        const std::size_t i = claimants.front();
        if (detail::association_cost(curr[i], prev_clusters[j], R_level) <= gate) {
          owner[i] = prev_owner[j];
          prev_taken[j] = true;
        }
      }

      // Phase 2: Hungarian over the remaining clusters.
      std::vector<std::size_t> free_prev, free_curr;
      for (std::size_t j = 0; j < prev_clusters.size(); ++j)
        if (!prev_taken[j]) free_prev.push_back(j);
      for (std::size_t i = 0; i < curr.size(); ++i)
        if (owner[i] < 0) free_curr.push_back(i);

      if (!free_prev.empty() && !free_curr.empty()) {
        const std::size_t n = free_prev.size() + free_curr.size();
        std::vector<std::vector<double>> cost(n, std::vector<double>(n, gate));
        for (std::size_t a = free_prev.size(); a < n; ++a)
          for (std::size_t b = free_curr.size(); b < n; ++b) cost[a][b] = 0.0;
        for (std::size_t a = 0; a < free_prev.size(); ++a)
          for (std::size_t b = 0; b < free_curr.size(); ++b)
            cost[a][b] = detail::association_cost(prev_clusters[free_prev[a]],
                                                  curr[free_curr[b]], R_level);
        const std::vector<int> assign = solve_assignment(cost);
        for (std::size_t a = 0; a < free_prev.size(); ++a) {
          const int b = assign[a];
          if (b < 0 || b >= static_cast<int>(free_curr.size())) continue;
          if (cost[a][b] > gate) continue;  // gating: spawn a new track instead
          owner[free_curr[b]] = prev_owner[free_prev[a]];
        }
      }
    }

    for (std::size_t i = 0; i < curr.size(); ++i) {
      if (owner[i] < 0) {
        owner[i] = static_cast<int>(tracks.size());
        tracks.push_back(ObjectTrack{static_cast<int>(tracks.size()), {}});
      }
      tracks[owner[i]].observations.push_back(curr[i]);
    }

    prev_clusters = curr;
    prev_owner = owner;
  }

  return tracks;
}

}  // namespace autocal
