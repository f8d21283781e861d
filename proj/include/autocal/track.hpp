#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <vector>

#include "autocal/cluster.hpp"
#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/groundplane.hpp"

namespace autocal {

/// Planar constant-turn-rate-and-acceleration state.
struct CtraState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading, wrapped to (-pi, pi]
  double v = 0.0;
  double a = 0.0;
  double omega = 0.0;
};

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline Vec6 to_vec(const CtraState& s) {
  Vec6 v;
  v << s.x, s.y, s.theta, s.v, s.a, s.omega;
  return v;
}

inline CtraState to_state(const Vec6& v) {
  return {v(0), v(1), wrap_angle(v(2)), v(3), v(4), v(5)};
}

/// Closed-form CTRA propagation over dt seconds. Below |omega| = 1e-6
/// rad/s the constant-acceleration straight-line limit is used.
inline CtraState ctra_predict(const CtraState& s, double dt) {
  if (dt < 0) fail(ErrorCode::invalid_argument, "ctra_predict: dt must be >= 0");
  CtraState out = s;
  const double v1 = s.v + s.a * dt;
  if (std::abs(s.omega) < 1e-6) {
    const double ds = s.v * dt + 0.5 * s.a * dt * dt;
    out.x += ds * std::cos(s.theta);
    out.y += ds * std::sin(s.theta);
  } else {
    const double th1 = s.theta + s.omega * dt;
    const double w2 = s.omega * s.omega;
    out.x += (v1 * s.omega * std::sin(th1) + s.a * std::cos(th1) -
              s.v * s.omega * std::sin(s.theta) - s.a * std::cos(s.theta)) / w2;
    out.y += (-v1 * s.omega * std::cos(th1) + s.a * std::sin(th1) +
              s.v * s.omega * std::cos(s.theta) - s.a * std::sin(s.theta)) / w2;
  }
  out.theta = wrap_angle(s.theta + s.omega * dt);
  out.v = v1;
  return out;
}

/// Process / measurement noise magnitudes. Process noise is continuous
/// white noise on jerk and turn acceleration.
struct NoiseSpec {
  double sigma_jerk = 2.0;       // m/s^3
  double sigma_omega_dot = 0.5;  // rad/s^2
  double sigma_meas = 0.5;       // m, per axis
};

struct SmoothedState {
  TimeUs t = 0;
  CtraState state;
  Mat6 cov = Mat6::Identity();
};

/// Forward-filtered and RTS-smoothed estimates, one per measurement.
struct CtraFilterResult {
  std::vector<SmoothedState> filtered;
  std::vector<SmoothedState> smoothed;
};

/// Output of smooth_track; keeps the source track so later stages can
/// reach the raw member targets and pre-smoothing centroids.
struct SmoothedTrack {
  int id = 0;
  std::vector<SmoothedState> states;
  ObjectTrack source;
  std::vector<double> leveled_z;  // pre-smoothing leveled centroid z per observation
};

namespace detail {

// Standard sigma-point parameterization; alpha is deliberately small so
// the points hug the mean of the mildly nonlinear CTRA model.
struct UkfWeights {
  static constexpr int n = 6;
  double lambda, wm0, wc0, wi, scale;
  UkfWeights() {
    const double alpha = 1e-3 * std::sqrt(3.0);
    const double kappa = 0.0;
    const double beta = 2.0;
    lambda = alpha * alpha * (n + kappa) - n;
    wm0 = lambda / (n + lambda);
    wc0 = wm0 + 1.0 - alpha * alpha + beta;
    wi = 0.5 / (n + lambda);
    scale = std::sqrt(n + lambda);
  }
};

inline Mat6 symmetrize(const Mat6& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factor of P with a PSD guard: eigenvalues below -1e-9 are a
/// numerical failure, small negatives are clamped to keep the filter
/// going.
inline Mat6 safe_cholesky(const Mat6& P, TimeUs t) {
  Eigen::LLT<Mat6> llt(symmetrize(P) + 1e-12 * Mat6::Identity());
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat6> eig(symmetrize(P));
  if (eig.eigenvalues().minCoeff() < -1e-9)
    fail(ErrorCode::numerical_failure,
         "covariance collapse at t=" + std::to_string(t));
  const Vec6 clamped = eig.eigenvalues().cwiseMax(1e-12);
  const Mat6 fixed = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::LLT<Mat6> llt2(symmetrize(fixed));
  if (llt2.info() != Eigen::Success)
    fail(ErrorCode::numerical_failure,
         "covariance collapse at t=" + std::to_string(t));
  return llt2.matrixL();
}

inline void sigma_points(const Vec6& m, const Mat6& P, const UkfWeights& w, TimeUs t,
                         std::vector<Vec6>& out) {
  const Mat6 L = safe_cholesky(P, t);
  out.assign(2 * UkfWeights::n + 1, m);
  for (int i = 0; i < UkfWeights::n; ++i) {
    out[1 + i] += w.scale * L.col(i);
    out[1 + UkfWeights::n + i] -= w.scale * L.col(i);
  }
}

/// Weighted mean over sigma points with a circular mean for the heading.
inline Vec6 sigma_mean(const std::vector<Vec6>& pts, const UkfWeights& w) {
  Vec6 m = Vec6::Zero();
  double c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double wi = i == 0 ? w.wm0 : w.wi;
    m += wi * pts[i];
    c += wi * std::cos(pts[i](2));
    s += wi * std::sin(pts[i](2));
  }
  m(2) = std::atan2(s, c);
  return m;
}

inline Vec6 state_residual(const Vec6& a, const Vec6& b) {
  Vec6 d = a - b;
  d(2) = wrap_angle(d(2));
  return d;
}

/// Process noise from continuous white jerk / turn-acceleration noise,
/// with the along-track chain projected onto x/y via the heading.
inline Mat6 process_noise(double dt, double heading, const NoiseSpec& noise) {
  const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt, d5 = d4 * dt;
  Eigen::Matrix3d Bj;  // (along-track pos, v, a)
  Bj << d5 / 20, d4 / 8, d3 / 6,
        d4 / 8, d3 / 3, d2 / 2,
        d3 / 6, d2 / 2, dt;
  Bj *= noise.sigma_jerk * noise.sigma_jerk;

  Eigen::Matrix2d Bw;  // (theta, omega)
  Bw << d3 / 3, d2 / 2,
        d2 / 2, dt;
  Bw *= noise.sigma_omega_dot * noise.sigma_omega_dot;

  Eigen::Matrix<double, 6, 3> E = Eigen::Matrix<double, 6, 3>::Zero();
  E(0, 0) = std::cos(heading);
  E(1, 0) = std::sin(heading);
  E(3, 1) = 1.0;
  E(4, 2) = 1.0;
  Eigen::Matrix<double, 6, 2> F = Eigen::Matrix<double, 6, 2>::Zero();
  F(2, 0) = 1.0;
  F(5, 1) = 1.0;

  return E * Bj * E.transpose() + F * Bw * F.transpose() + 1e-12 * Mat6::Identity();
}

}  // namespace detail

/// Unscented Kalman filter with CTRA dynamics and (x, y) measurements,
/// followed by an unscented Rauch-Tung-Striebel backward pass. Timestamps
/// must be strictly increasing; one filtered and one smoothed state is
/// produced per measurement.
inline CtraFilterResult ctra_ukf_rts(const std::vector<TimeUs>& times,
                                     const std::vector<Eigen::Vector2d>& xy,
                                     const NoiseSpec& noise) {
  const std::size_t n = times.size();
  if (n != xy.size()) fail(ErrorCode::invalid_argument, "times/measurements size mismatch");
  if (n < 2) fail(ErrorCode::track_too_short, "need >= 2 measurements");
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (times[k + 1] <= times[k])
      fail(ErrorCode::invalid_argument, "measurement timestamps must strictly increase");

  const detail::UkfWeights w;
  auto weight_c = [&](std::size_t i) { return i == 0 ? w.wc0 : w.wi; };

  // First state from the first two measurements: position from the first,
  // speed and heading from the finite difference.
  const double dt01 = seconds(times[1] - times[0]);
  const Eigen::Vector2d diff = xy[1] - xy[0];
  Vec6 m;
  m << xy[0].x(), xy[0].y(), std::atan2(diff.y(), diff.x()), diff.norm() / dt01, 0.0, 0.0;
  Mat6 P = Mat6::Zero();
  P.diagonal() << 1.0, 1.0, std::pow(deg2rad(30.0), 2), 25.0, 4.0, std::pow(deg2rad(20.0), 2);

  CtraFilterResult result;
  result.filtered.push_back({times[0], to_state(m), P});

  std::vector<Vec6> chi, chi_prop;
  std::vector<Vec6> pred_means;   // m_{k+1|k}
  std::vector<Mat6> pred_covs;    // P_{k+1|k}
  std::vector<Mat6> cross_covs;   // C_k between filtered k and predicted k+1

  const Eigen::Matrix2d R_meas =
      noise.sigma_meas * noise.sigma_meas * Eigen::Matrix2d::Identity();

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = seconds(times[k + 1] - times[k]);

    // Predict.
    detail::sigma_points(m, P, w, times[k], chi);
    chi_prop.resize(chi.size());
    for (std::size_t i = 0; i < chi.size(); ++i)
      chi_prop[i] = to_vec(ctra_predict(to_state(chi[i]), dt));
    Vec6 m_pred = detail::sigma_mean(chi_prop, w);
    Mat6 P_pred = Mat6::Zero();
    Mat6 C = Mat6::Zero();
    for (std::size_t i = 0; i < chi.size(); ++i) {
      const Vec6 dp = detail::state_residual(chi_prop[i], m_pred);
      const Vec6 df = detail::state_residual(chi[i], m);
      P_pred += weight_c(i) * dp * dp.transpose();
      C += weight_c(i) * df * dp.transpose();
    }
    P_pred = detail::symmetrize(P_pred) + detail::process_noise(dt, m_pred(2), noise);

    pred_means.push_back(m_pred);
    pred_covs.push_back(P_pred);
    cross_covs.push_back(C);

    // Update with z_{k+1}, redrawing sigma points from the prediction so
    // the measurement statistics include the process noise.
    detail::sigma_points(m_pred, P_pred, w, times[k + 1], chi);
    Eigen::Vector2d z_pred = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < chi.size(); ++i)
      z_pred += (i == 0 ? w.wm0 : w.wi) * chi[i].head<2>();
    Eigen::Matrix2d S = R_meas;
    Eigen::Matrix<double, 6, 2> P_xz = Eigen::Matrix<double, 6, 2>::Zero();
    for (std::size_t i = 0; i < chi.size(); ++i) {
      const Eigen::Vector2d dz = chi[i].head<2>() - z_pred;
      const Vec6 dx = detail::state_residual(chi[i], m_pred);
      S += weight_c(i) * dz * dz.transpose();
      P_xz += weight_c(i) * dx * dz.transpose();
    }
    const Eigen::Matrix<double, 6, 2> K = P_xz * S.inverse();
    m = m_pred + K * (xy[k + 1] - z_pred);
    m(2) = wrap_angle(m(2));
    P = detail::symmetrize(P_pred - K * S * K.transpose());

    result.filtered.push_back({times[k + 1], to_state(m), P});
  }

  // Backward unscented RTS pass.
  result.smoothed = result.filtered;
  for (std::size_t k = n - 1; k-- > 0;) {
    const Mat6& P_pred = pred_covs[k];
    const Mat6 G = P_pred.ldlt().solve(cross_covs[k].transpose()).transpose();
    const Vec6 m_f = to_vec(result.filtered[k].state);
    const Vec6 m_next = to_vec(result.smoothed[k + 1].state);
    Vec6 dm = detail::state_residual(m_next, pred_means[k]);
    Vec6 m_s = m_f + G * dm;
    m_s(2) = wrap_angle(m_s(2));
    Mat6 P_s = detail::symmetrize(result.filtered[k].cov +
                                  G * (result.smoothed[k + 1].cov - P_pred) * G.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> eig(P_s);
    if (eig.eigenvalues().minCoeff() < -1e-9)
      fail(ErrorCode::numerical_failure,
           "covariance collapse at t=" + std::to_string(result.filtered[k].t));
    result.smoothed[k] = {result.filtered[k].t, to_state(m_s), P_s};
  }

  return result;
}

/// Smooths one object track: observations are leveled with R_level,
/// reduced to (x, y) measurements, filtered forward and smoothed backward.
/// Tracks shorter than min_len observations are rejected.
inline SmoothedTrack smooth_track(const ObjectTrack& track, const GroundPlane& level,
                                  const NoiseSpec& noise, std::size_t min_len = 5) {
  if (track.observations.size() < min_len)
    fail(ErrorCode::track_too_short,
         "track " + std::to_string(track.id) + " has " +
             std::to_string(track.observations.size()) + " observations, need " +
             std::to_string(min_len));

  std::vector<TimeUs> times;
  std::vector<Eigen::Vector2d> xy;
  SmoothedTrack out;
  out.id = track.id;
  out.source = track;
  for (const auto& obs : track.observations) {
    const Eigen::Vector3d leveled = level.R_level * obs.centroid;
    times.push_back(obs.t);
    xy.push_back(leveled.head<2>());
    out.leveled_z.push_back(leveled.z());
  }

  out.states = ctra_ukf_rts(times, xy, noise).smoothed;
  return out;
}

}  // namespace autocal
