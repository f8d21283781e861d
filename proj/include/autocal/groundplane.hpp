#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "autocal/error.hpp"
#include "autocal/geometry.hpp"

namespace autocal {

/// Road plane in the sensor frame: n . p = d for plane points, n_z > 0,
/// and R_level . n = e_z. R_level is a pure Ry(pitch) * Rx(roll) product,
/// so it carries exactly the sensor roll and pitch and no yaw.
struct GroundPlane {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 0.0;
  Eigen::Matrix3d R_level = Eigen::Matrix3d::Identity();
};

namespace detail {

inline std::vector<std::size_t> density_counts_brute(const std::vector<Eigen::Vector3d>& pts,
                                                     double radius) {
  const double r2 = radius * radius;
  std::vector<std::size_t> counts(pts.size(), 1);  // self-inclusive
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if ((pts[i] - pts[j]).squaredNorm() <= r2) {
        ++counts[i];
        ++counts[j];
      }
  return counts;
}

/// Uniform-grid neighbor counting, identical results to the brute-force
/// path; used above 5e4 points where O(n^2) gets slow.
inline std::vector<std::size_t> density_counts_grid(const std::vector<Eigen::Vector3d>& pts,
                                                    double radius) {
  const double r2 = radius * radius;
  auto cell_of = [&](const Eigen::Vector3d& p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / radius));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / radius));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z() / radius));
    return std::tuple<std::int64_t, std::int64_t, std::int64_t>{cx, cy, cz};
  };
  auto hash_cell = [](std::int64_t x, std::int64_t y, std::int64_t z) {
    std::uint64_t h = static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4Full;
    h ^= static_cast<std::uint64_t>(z) * 0x165667B19E3779F9ull;
    return h;
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  grid.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [cx, cy, cz] = cell_of(pts[i]);
    grid[hash_cell(cx, cy, cz)].push_back(i);
  }

  std::vector<std::size_t> counts(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [cx, cy, cz] = cell_of(pts[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(hash_cell(cx + dx, cy + dy, cz + dz));
          if (it == grid.end()) continue;
          for (std::size_t j : it->second)
            if ((pts[i] - pts[j]).squaredNorm() <= r2) ++counts[i];
        }
  }
  return counts;
}

}  // namespace detail

/// Keeps the points whose neighbor count within `radius` reaches
/// keep_fraction of the maximum observed density.
inline std::vector<Eigen::Vector3d> density_filter(const std::vector<Eigen::Vector3d>& pts,
                                                   double radius, double keep_fraction) {
  if (pts.empty()) fail(ErrorCode::empty_input, "density_filter: no points");
  if (!(radius > 0)) fail(ErrorCode::invalid_argument, "density_filter: radius must be > 0");
  if (!(keep_fraction > 0 && keep_fraction < 1))
    fail(ErrorCode::invalid_argument, "density_filter: keep_fraction must be in (0, 1)");

  const std::vector<std::size_t> counts = pts.size() > 50000
                                              ? detail::density_counts_grid(pts, radius)
                                              : detail::density_counts_brute(pts, radius);
  const std::size_t max_count = *std::max_element(counts.begin(), counts.end());
  const double threshold = keep_fraction * static_cast<double>(max_count);

  std::vector<Eigen::Vector3d> kept;
  kept.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (static_cast<double>(counts[i]) >= threshold) kept.push_back(pts[i]);
  return kept;
}

/// Least-squares plane through the points: subtract the centroid and take
/// the singular vector of the smallest singular value as the normal
/// (sign-normalized to n_z > 0). Collinear or near-collinear input is a
/// degenerate-geometry error.
inline GroundPlane fit_plane(const std::vector<Eigen::Vector3d>& pts) {
  if (pts.size() < 3) fail(ErrorCode::degenerate_geometry, "fit_plane: need >= 3 points");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  Eigen::MatrixXd centered(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) centered.row(i) = (pts[i] - centroid).transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1.0))
    fail(ErrorCode::degenerate_geometry, "fit_plane: points are collinear");

  Eigen::Vector3d n = svd.matrixV().col(2);
  if (n.z() < 0) n = -n;
  if (n.z() <= 1e-12)
    fail(ErrorCode::degenerate_geometry, "fit_plane: plane normal has no vertical component");

  GroundPlane plane;
  plane.n = n;
  plane.d = n.dot(centroid);
  return plane;
}

/// Rotation taking the plane normal onto e_z, built as Ry(pitch)*Rx(roll)
/// so its Euler yaw is exactly zero. Identity for n = e_z.
inline Eigen::Matrix3d leveling_rotation(const Eigen::Vector3d& n) {
  if (std::abs(n.norm() - 1.0) > 1e-9)
    fail(ErrorCode::invalid_argument, "leveling_rotation: normal must be unit length");
  if (!(n.z() > 0))
    fail(ErrorCode::invalid_argument, "leveling_rotation: normal must have n_z > 0");
  const double roll = std::atan2(n.y(), n.z());
  const double pitch = std::atan2(-n.x(), std::hypot(n.y(), n.z()));
  return rot_y(pitch) * rot_x(roll);
}

/// Full ground-plane stage: density filter over the merged moving-target
/// cloud, SVD plane fit, then the leveling rotation.
inline GroundPlane estimate_ground(const std::vector<Eigen::Vector3d>& moving_targets,
                                   double radius = 1.0, double keep_fraction = 0.2) {
  const std::vector<Eigen::Vector3d> kept = density_filter(moving_targets, radius, keep_fraction);
  GroundPlane plane = fit_plane(kept);
  plane.R_level = leveling_rotation(plane.n);
  return plane;
}

}  // namespace autocal
