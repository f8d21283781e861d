#pragma once

#include <Eigen/Geometry>
#include <fstream>
#include <string>

#include <json.hpp>

#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/types.hpp"

namespace autocal {

/// calibration.json, schema 1. The quaternion is the authoritative
/// rotation encoding; rpy_deg is for human consumption.
inline void write_calibration(const std::string& path, const Calibration& calib) {
  const Eigen::Vector4d q = rotation_to_quaternion_wxyz(calib.R);
  const Eigen::Vector3d rpy = rotation_to_euler(calib.R);
  const Eigen::Vector3d rpy_level = rotation_to_euler(calib.R_level);

  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["utm_zone"] = calib.origin.zone;
  j["origin"] = {calib.origin.easting, calib.origin.northing};
  j["t"] = {calib.t.x(), calib.t.y(), calib.t.z()};
  j["q_wxyz"] = {q(0), q(1), q(2), q(3)};
  j["rpy_deg"] = {rad2deg(rpy.x()), rad2deg(rpy.y()), rad2deg(rpy.z())};
  j["r_level_rpy_deg"] = {rad2deg(rpy_level.x()), rad2deg(rpy_level.y()), 0.0};
  j["residual_rms_m"] = calib.residual_rms_m;
  j["n_hypotheses"] = calib.n_hypotheses;
  j["refined"] = calib.refined;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write calibration: " + path);
  out << j.dump(2) << "\n";
}

inline Calibration read_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_failure, "cannot open calibration: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_failure, path + ": " + e.what());
  }

  Calibration calib;
  try {
    if (j.at("schema").get<int>() != 1)
      fail(ErrorCode::bad_schema, path + ": unsupported calibration schema");
    calib.origin.zone = j.at("utm_zone").get<std::string>();
    calib.origin.easting = j.at("origin").at(0).get<double>();
    calib.origin.northing = j.at("origin").at(1).get<double>();
    for (int i = 0; i < 3; ++i) calib.t(i) = j.at("t").at(i).get<double>();
    Eigen::Quaterniond q(j.at("q_wxyz").at(0).get<double>(), j.at("q_wxyz").at(1).get<double>(),
                         j.at("q_wxyz").at(2).get<double>(), j.at("q_wxyz").at(3).get<double>());
    q.normalize();
    calib.R = q.toRotationMatrix();
    const double roll = deg2rad(j.at("r_level_rpy_deg").at(0).get<double>());
    const double pitch = deg2rad(j.at("r_level_rpy_deg").at(1).get<double>());
    calib.R_level = rot_y(pitch) * rot_x(roll);
    calib.residual_rms_m = j.at("residual_rms_m").get<double>();
    calib.n_hypotheses = j.at("n_hypotheses").get<int>();
    calib.refined = j.at("refined").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_failure, path + ": " + e.what());
  }
  if (!is_rotation_matrix(calib.R, 1e-6))
    fail(ErrorCode::parse_failure, path + ": rotation is not orthonormal");
  return calib;
}

}  // namespace autocal
