#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

#include "autocal/error.hpp"
#include "autocal/types.hpp"

namespace autocal {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double x = std::remainder(a, 2.0 * kPi);
  if (x <= -kPi) x += 2.0 * kPi;
  return x;
}

inline Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return m;
}

inline Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return m;
}

inline Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return m;
}

/// True iff R is orthonormal with determinant +1 within tol (elementwise).
inline bool is_rotation_matrix(const Eigen::Matrix3d& R, double tol = 1e-9) {
  const Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() < tol && std::abs(R.determinant() - 1.0) < tol;
}

/// Builds R = Rz(yaw) * Ry(pitch) * Rx(roll). This extrinsic x-y-z
/// convention is fixed for the whole project.
inline Eigen::Matrix3d euler_to_rotation(double roll, double pitch, double yaw) {
  if (!std::isfinite(roll) || !std::isfinite(pitch) || !std::isfinite(yaw))
    fail(ErrorCode::invalid_argument, "euler angles must be finite");
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

/// Inverse of euler_to_rotation with pitch in (-pi/2, pi/2).
/// Fails with gimbal_lock when |R(2,0)| >= 1 - 1e-9.
inline Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& R) {
  if (!is_rotation_matrix(R, 1e-6))
    fail(ErrorCode::invalid_argument, "not a rotation matrix");
  if (std::abs(R(2, 0)) >= 1.0 - 1e-9)
    fail(ErrorCode::gimbal_lock, "pitch at +/-90 deg, euler angles not unique");
  const double pitch = -std::asin(R(2, 0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

/// Rotation angle of R in [0, pi].
inline double rotation_angle(const Eigen::Matrix3d& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

/// Angle of the rotation error matrix Rj^T * Ri, i.e. the axis-angle
/// magnitude of the relative rotation between two hypotheses.
inline double rotation_error_angle(const Eigen::Matrix3d& R_i, const Eigen::Matrix3d& R_j) {
  return rotation_angle(R_j.transpose() * R_i);
}

/// Transforms a sensor-frame point into the world frame.
inline Eigen::Vector3d apply_calibration(const Calibration& c, const Eigen::Vector3d& p_sensor) {
  return c.R * p_sensor + c.t;
}

/// Unit quaternion (w, x, y, z) for R, normalized to w >= 0 so the file
/// output is deterministic.
inline Eigen::Vector4d rotation_to_quaternion_wxyz(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

}  // namespace autocal
