#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace autocal {

/// Timestamps are integer microseconds since epoch. Integer time avoids
/// floating-point drift over long recordings.
using TimeUs = std::int64_t;

inline double seconds(TimeUs dt) { return static_cast<double>(dt) * 1e-6; }

/// One radar detection in the sensor frame. v_rad is signed radial
/// velocity, positive = receding from the sensor.
struct RadarTarget {
  TimeUs t = 0;
  Eigen::Vector3d p_sensor = Eigen::Vector3d::Zero();
  double v_rad = 0.0;
  std::optional<double> rcs;
};

/// One radar scan: all targets share the frame timestamp.
struct RadarFrame {
  TimeUs t = 0;
  std::vector<RadarTarget> targets;
};

/// Geo-referenced vehicle pose. Positions are local-origin-shifted UTM
/// (easting, northing, altitude); rpy angles are each in (-pi, pi].
struct VehiclePose {
  TimeUs t = 0;
  Eigen::Vector3d p_world = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
};

/// Calibration-vehicle geometry. ref_offset points from the localization
/// reference point (rear-axle center) to the bounding-box center, in the
/// vehicle frame.
struct VehicleDims {
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  Eigen::Vector3d ref_offset = Eigen::Vector3d::Zero();
};

/// UTM reference origin used for local shifting of world coordinates.
/// Only easting/northing are shifted; altitude is kept as-is.
struct UtmOrigin {
  std::string zone;
  double easting = 0.0;
  double northing = 0.0;
};

/// Final sensor-to-world transform: p_world = R * p_sensor + t.
/// R composes the registration rotation with the ground-plane leveling
/// rotation R_level; t is in the local-origin-shifted UTM frame.
struct Calibration {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R_level = Eigen::Matrix3d::Identity();
  UtmOrigin origin;

  // Pipeline metadata carried into the output file.
  double residual_rms_m = 0.0;
  int n_hypotheses = 0;
  bool refined = false;
};

}  // namespace autocal
