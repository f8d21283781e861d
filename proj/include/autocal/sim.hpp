#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/groundplane.hpp"
#include "autocal/ingest.hpp"
#include "autocal/rng.hpp"
#include "autocal/types.hpp"

namespace autocal {

/// Sensor field of view in spherical coordinates, boundary-inclusive.
struct FovLimits {
  double az_min = deg2rad(-60.0);
  double az_max = deg2rad(60.0);
  double el_min = deg2rad(-15.0);
  double el_max = deg2rad(15.0);
  double r_min = 0.5;
  double r_max = 150.0;
};

/// True iff the sensor-frame point lies inside the FoV limits (inclusive).
inline bool fov_filter(const Eigen::Vector3d& p_sensor, const FovLimits& fov) {
  if (!(fov.az_min <= fov.az_max && fov.el_min <= fov.el_max && fov.r_min <= fov.r_max))
    fail(ErrorCode::invalid_argument, "fov limits are not well-ordered");
  const double r = p_sensor.norm();
  if (r < fov.r_min || r > fov.r_max) return false;
  const double az = std::atan2(p_sensor.y(), p_sensor.x());
  const double el = std::asin(p_sensor.z() / r);
  return az >= fov.az_min && az <= fov.az_max && el >= fov.el_min && el <= fov.el_max;
}

enum class ReflectionModel { surface, corners };

/// Synthetic scenario description. The site frame has its ground plane at
/// z = 0; pose rows are written as base_easting/base_northing + site
/// coordinates. The vehicle drives the (implicitly closed) waypoint loop
/// `passes` times at the per-waypoint speeds.
struct ScenarioConfig {
  // Ground-truth sensor pose, site frame.
  Eigen::Vector3d sensor_pos = {24.0, -41.5692193816531, 5.0};
  double roll = deg2rad(1.5);
  double pitch = deg2rad(-12.0);
  double yaw = deg2rad(120.0);

  std::string utm_zone = "32U";
  double base_easting = 570000.0;
  double base_northing = 5620000.0;

  int passes = 6;
  std::vector<Eigen::Vector2d> waypoints;
  std::vector<double> speeds;

  VehicleDims dims{4.5, 1.9, 1.6, {0.0, 0.0, 0.8}};
  double locref_height = 0.3;

  double radar_rate = 15.0;
  double pose_rate = 50.0;

  double sigma_range = 0.0;   // m
  double sigma_angle = 0.0;   // rad, applied to az and el
  double sigma_v = 0.0;       // m/s
  double clutter_rate = 0.0;  // expected clutter targets per frame
  ReflectionModel reflection_model = ReflectionModel::corners;

  FovLimits fov;
  std::uint64_t seed = 1;
  TimeUs t0 = 1700000000000000;  // µs
};

struct SimTarget {
  double r = 0.0, az = 0.0, el = 0.0;
  double v_rad = 0.0;
  int label = 0;  // 0 = vehicle, 1 = static clutter, 2 = moving clutter
};

struct SimFrame {
  TimeUs t = 0;
  std::vector<SimTarget> targets;
};

struct Scenario {
  std::vector<SimFrame> frames;
  PoseTrack poses;  // site-frame positions; origin fields hold the base offsets
  Calibration truth;
  VehicleDims dims;
};

namespace detail {

/// Closed-form arc-length parameterization of the closed waypoint loop
/// with piecewise-linear speed over arc length.
class PathProfile {
 public:
  PathProfile(const std::vector<Eigen::Vector2d>& wpts, const std::vector<double>& speeds) {
    if (wpts.size() < 3) fail(ErrorCode::invalid_argument, "path needs >= 3 waypoints");
    if (speeds.size() != wpts.size())
      fail(ErrorCode::invalid_argument, "need one speed per waypoint");
    for (double v : speeds)
      if (!(v > 0)) fail(ErrorCode::invalid_argument, "waypoint speeds must be > 0");

    const std::size_t n = wpts.size();
    for (std::size_t i = 0; i < n; ++i) {
      Segment seg;
      seg.a = wpts[i];
      const Eigen::Vector2d b = wpts[(i + 1) % n];
      seg.length = (b - seg.a).norm();
      if (seg.length <= 1e-9) fail(ErrorCode::invalid_argument, "zero-length path segment");
      seg.dir = (b - seg.a) / seg.length;
      seg.v0 = speeds[i];
      seg.v1 = speeds[(i + 1) % n];
      seg.duration = std::abs(seg.v1 - seg.v0) < 1e-12
                         ? seg.length / seg.v0
                         : seg.length / (seg.v1 - seg.v0) * std::log(seg.v1 / seg.v0);
      seg.t_begin = segments_.empty() ? 0.0 : segments_.back().t_begin + segments_.back().duration;
      segments_.push_back(seg);
    }
    loop_duration_ = segments_.back().t_begin + segments_.back().duration;
  }

  double loop_duration() const { return loop_duration_; }

  struct State {
    Eigen::Vector2d pos;
    double heading;
    double speed;
  };

  /// Vehicle state at time t (seconds from scenario start), looping.
  State at(double t) const {
    double tau = std::fmod(t, loop_duration_);
    if (tau < 0) tau += loop_duration_;
    std::size_t lo = 0, hi = segments_.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (segments_[mid].t_begin <= tau) lo = mid;
      else hi = mid;
    }
    const Segment& seg = segments_[lo];
    const double dt = tau - seg.t_begin;
    double s;
    if (std::abs(seg.v1 - seg.v0) < 1e-12) {
      s = seg.v0 * dt;
    } else {
      const double dv = seg.v1 - seg.v0;
      s = seg.length * seg.v0 / dv * (std::exp(dv * dt / seg.length) - 1.0);
    }
    s = std::min(s, seg.length);
    State out;
    out.pos = seg.a + s * seg.dir;
    out.heading = std::atan2(seg.dir.y(), seg.dir.x());
    out.speed = seg.v0 + (seg.v1 - seg.v0) * s / seg.length;
    return out;
  }

 private:
  struct Segment {
    Eigen::Vector2d a, dir;
    double length, v0, v1, duration, t_begin;
  };
  std::vector<Segment> segments_;
  double loop_duration_ = 0.0;
};

/// Reflection points are drawn just inside the body outline so noiseless
/// targets land strictly inside the footprint polygon.
constexpr double kBodyInset = 0.05;

inline Eigen::Vector3d vehicle_point(const Eigen::Vector2d& center_xy, double heading,
                                     double local_x, double local_y, double z) {
  const double c = std::cos(heading), s = std::sin(heading);
  return {center_xy.x() + c * local_x - s * local_y,
          center_xy.y() + s * local_x + c * local_y, z};
}

}  // namespace detail

/// Canonical test-fixture scenario: a pole-mounted sensor (roll 1.5 deg,
/// pitch -12 deg, yaw 120 deg, 5 m high) watching a figure-eight course.
/// The two crossing straights pass the middle of the view in opposite
/// directions and the turn circles counter-rotate, so heading-fixed
/// offsets (cluster-window lag, the localization reference offset) cancel
/// instead of twisting the fitted rotation. The turn circles leave the
/// azimuth cone, so every transit yields a fresh object track.
inline ScenarioConfig canonical_scenario() {
  ScenarioConfig cfg;
  const Eigen::Vector2d b(std::cos(cfg.yaw), std::sin(cfg.yaw));  // boresight
  const Eigen::Vector2d w(-b.y(), b.x());
  auto site = [&](double u, double v) -> Eigen::Vector2d {
    return cfg.sensor_pos.head<2>() + u * b + v * w;
  };

  // Turn circles (boresight frame) and their crossing internal tangents.
  const double cu = 55.0, cw = 52.0, radius = 16.0;
  const Eigen::Vector2d c1(cu, -cw), c2(cu, cw);
  const double d = 2.0 * cw;
  const double gamma = std::acos(2.0 * radius / d);  // tangent direction vs +u
  const Eigen::Vector2d e1(std::cos(gamma), std::sin(gamma));
  const Eigen::Vector2d n1(-e1.y(), e1.x());
  const Eigen::Vector2d t1a = c1 + radius * n1;  // straight 1: t1a -> t2a
  const Eigen::Vector2d t2a = c2 - radius * n1;
  const Eigen::Vector2d e2(e1.x(), -e1.y());
  const Eigen::Vector2d n2(-e2.y(), e2.x());
  const Eigen::Vector2d t2b = c2 - radius * n2;  // straight 2: t2b -> t1b
  const Eigen::Vector2d t1b = c1 + radius * n2;

  std::vector<Eigen::Vector2d> wpts;
  auto add_straight = [&](const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
    const double len = (to - from).norm();
    const Eigen::Vector2d dir = (to - from) / len;
    for (double s = 0.0; s < len - 1e-9; s += 3.0) {
      const Eigen::Vector2d p = from + s * dir;
      wpts.push_back(site(p.x(), p.y()));
    }
  };
  // Arcs are sampled finely: coarse sampling means visible heading jumps,
  // which the CTRA smoother turns into cross-track transients.
  auto add_arc = [&](const Eigen::Vector2d& center, double from_deg, double to_deg) {
    const double step = from_deg < to_deg ? 1.5 : -1.5;
    for (double a = from_deg; (step > 0) ? a < to_deg - 1e-9 : a > to_deg + 1e-9; a += step) {
      const Eigen::Vector2d p =
          center + radius * Eigen::Vector2d(std::cos(deg2rad(a)), std::sin(deg2rad(a)));
      wpts.push_back(site(p.x(), p.y()));
    }
  };

  auto angle_on = [&](const Eigen::Vector2d& c, const Eigen::Vector2d& p) {
    return rad2deg(std::atan2(p.y() - c.y(), p.x() - c.x()));
  };
  add_straight(t1a, t2a);
  // Counter-clockwise around the upper circle.
  double a0 = angle_on(c2, t2a), a1 = angle_on(c2, t2b);
  if (a1 < a0) a1 += 360.0;
  add_arc(c2, a0, a1);
  add_straight(t2b, t1b);
  // Clockwise around the lower circle.
  a0 = angle_on(c1, t1b);
  a1 = angle_on(c1, t1a);
  if (a1 > a0) a1 -= 360.0;
  add_arc(c1, a0, a1);

  cfg.waypoints = wpts;
  cfg.speeds.assign(wpts.size(), 3.0);
  cfg.passes = 3;  // each figure-eight circuit passes the sensor twice
  cfg.fov.az_min = deg2rad(-45.0);
  cfg.fov.az_max = deg2rad(45.0);
  cfg.fov.el_min = deg2rad(-30.0);
  cfg.fov.el_max = deg2rad(5.0);
  cfg.locref_height = 0.0;
  cfg.dims.ref_offset = {0.0, 0.0, 0.8};
  return cfg;
}

/// Simulates the scenario into radar frames (spherical, with noise), a
/// pose track, and the ground-truth calibration. Deterministic for a
/// fixed seed: every frame draws from its own derived RNG stream.
inline Scenario generate_scenario(const ScenarioConfig& cfg) {
  if (!(cfg.radar_rate > 0) || !(cfg.pose_rate > 0))
    fail(ErrorCode::invalid_argument, "rates must be > 0");
  if (cfg.passes < 1) fail(ErrorCode::invalid_argument, "passes must be >= 1");
  if (cfg.sigma_range < 0 || cfg.sigma_angle < 0 || cfg.sigma_v < 0 || cfg.clutter_rate < 0)
    fail(ErrorCode::invalid_argument, "noise parameters must be >= 0");

  const detail::PathProfile path(cfg.waypoints, cfg.speeds);
  const double duration = cfg.passes * path.loop_duration();

  const Eigen::Matrix3d R_true = euler_to_rotation(cfg.roll, cfg.pitch, cfg.yaw);
  const Eigen::Matrix3d R_true_inv = R_true.transpose();

  Scenario out;
  out.dims = cfg.dims;

  // Pose log, exactly pose_rate-periodic.
  const double pose_period_us = 1e6 / cfg.pose_rate;
  const auto n_pose = static_cast<std::size_t>(std::floor(duration * cfg.pose_rate)) + 1;
  for (std::size_t j = 0; j < n_pose; ++j) {
    const TimeUs t = cfg.t0 + static_cast<TimeUs>(std::llround(j * pose_period_us));
    const auto st = path.at(j * pose_period_us * 1e-6);
    VehiclePose pose;
    pose.t = t;
    pose.p_world = {st.pos.x(), st.pos.y(), cfg.locref_height};
    pose.rpy = {0.0, 0.0, wrap_angle(st.heading)};
    out.poses.samples.push_back(pose);
  }
  out.poses.nominal_rate_hz = cfg.pose_rate;
  out.poses.origin = {cfg.utm_zone, cfg.base_easting, cfg.base_northing};

  // Ground-truth calibration, shifted to the ingest origin convention
  // (floor of the first absolute pose position).
  const UtmOrigin origin{cfg.utm_zone,
                         std::floor(cfg.base_easting + out.poses.samples.front().p_world.x()),
                         std::floor(cfg.base_northing + out.poses.samples.front().p_world.y())};
  out.truth.R = R_true;
  out.truth.R_level = rot_y(cfg.pitch) * rot_x(cfg.roll);
  out.truth.origin = origin;
  out.truth.t = {cfg.sensor_pos.x() + cfg.base_easting - origin.easting,
                 cfg.sensor_pos.y() + cfg.base_northing - origin.northing, cfg.sensor_pos.z()};

  // Radar frames.
  const double radar_period_us = 1e6 / cfg.radar_rate;
  const auto n_radar = static_cast<std::size_t>(std::floor(duration * cfg.radar_rate)) + 1;
  const double half_l = cfg.dims.length / 2.0 - detail::kBodyInset;
  const double half_w = cfg.dims.width / 2.0 - detail::kBodyInset;
  std::size_t vehicle_frames = 0;

  for (std::size_t k = 0; k < n_radar; ++k) {
    SimFrame frame;
    frame.t = cfg.t0 + static_cast<TimeUs>(std::llround(k * radar_period_us));
    const double t_rel = k * radar_period_us * 1e-6;
    const auto st = path.at(t_rel);

    // Box center: localization point plus yaw-rotated ref_offset.
    const Eigen::Vector3d locref(st.pos.x(), st.pos.y(), cfg.locref_height);
    const double ch = std::cos(st.heading), sh = std::sin(st.heading);
    const Eigen::Vector2d center_xy(
        locref.x() + ch * cfg.dims.ref_offset.x() - sh * cfg.dims.ref_offset.y(),
        locref.y() + sh * cfg.dims.ref_offset.x() + ch * cfg.dims.ref_offset.y());
    const Eigen::Vector2d vel = st.speed * Eigen::Vector2d(ch, sh);

    Pcg32 rng(cfg.seed, derive_stream("reflections", k));

    // Corner mode uses the box-center radial velocity for every corner so
    // the stationary filter keeps or drops a frame's corners together;
    // otherwise the cluster centroid would drift off the box center
    // around radial-velocity zero crossings.
    const bool shared_v_rad = cfg.reflection_model == ReflectionModel::corners;
    const Eigen::Vector2d center_los =
        (center_xy - cfg.sensor_pos.head<2>()).normalized();
    const double center_v_rad = center_los.dot(vel);

    std::vector<Eigen::Vector3d> points;  // world, site frame
    if (cfg.reflection_model == ReflectionModel::corners) {
      for (const auto& [lx, ly] : {std::pair{half_l, half_w}, {-half_l, half_w},
                                   {-half_l, -half_w}, {half_l, -half_w}})
        points.push_back(detail::vehicle_point(center_xy, st.heading, lx, ly, 0.0));
    } else {
      const int n_refl = std::clamp(rng.poisson(4.0), 1, 8);
      // Scattering-center model: cars return radar energy mainly from the
      // wheel wells (all four, the radar sees under the body), the
      // bumpers, the facing body panel and the roof. Sensor-facing
      // scatterers are weighted up; the rest stay visible at reduced
      // weight, which matches the observation that targets originate from
      // any reflective part of the vehicle.
      const Eigen::Vector2d to_sensor = (cfg.sensor_pos.head<2>() - center_xy).normalized();
      const Eigen::Vector2d fwd(ch, sh), left(-sh, ch);
      struct Scatterer {
        double lx, ly, z, weight;
      };
      const double wheel_x = half_l - 0.8, wheel_y = half_w - 0.05;
      auto facing = [&](const Eigen::Vector2d& outward) {
        return 0.3 + 0.7 * std::max(0.0, to_sensor.dot(outward));
      };
      const std::vector<Scatterer> scatterers{
          {wheel_x, wheel_y, 0.3, 1.0},
          {wheel_x, -wheel_y, 0.3, 1.0},
          {-wheel_x, wheel_y, 0.3, 1.0},
          {-wheel_x, -wheel_y, 0.3, 1.0},
          {half_l - 0.05, 0.0, 0.5, facing(fwd)},
          {-half_l + 0.05, 0.0, 0.5, facing(-fwd)},
          {0.0, half_w - 0.05, 0.9, facing(left)},
          {0.0, -half_w + 0.05, 0.9, facing(-left)},
          {0.0, 0.0, cfg.dims.height, 0.6},
      };
      double total_weight = 0.0;
      for (const auto& s : scatterers) total_weight += s.weight;

      for (int i = 0; i < n_refl; ++i) {
        double pick = rng.uniform() * total_weight;
        const Scatterer* chosen = &scatterers.back();
        for (const auto& s : scatterers) {
          if (pick < s.weight) {
            chosen = &s;
            break;
          }
          pick -= s.weight;
        }
        const double lx = std::clamp(chosen->lx + rng.uniform(-0.2, 0.2), -half_l, half_l);
        const double ly = std::clamp(chosen->ly + rng.uniform(-0.2, 0.2), -half_w, half_w);
        const double z = std::max(0.05, chosen->z + rng.uniform(-0.1, 0.1));
        points.push_back(detail::vehicle_point(center_xy, st.heading, lx, ly, z));
      }
    }

    // Corner reflections are an all-or-none oracle: a partially visible
    // corner set would shift the cluster centroid off the box center.
    if (cfg.reflection_model == ReflectionModel::corners) {
      bool all_visible = true;
      for (const auto& p_world : points)
        if (!fov_filter(R_true_inv * (p_world - cfg.sensor_pos), cfg.fov)) all_visible = false;
      if (!all_visible) points.clear();
    }

    bool any_vehicle = false;
    for (const auto& p_world : points) {
      const Eigen::Vector3d p_sensor = R_true_inv * (p_world - cfg.sensor_pos);
      if (!fov_filter(p_sensor, cfg.fov)) continue;
      any_vehicle = true;
      SimTarget tgt;
      const double r = p_sensor.norm();
      tgt.r = std::max(0.01, r + cfg.sigma_range * rng.gaussian());
      tgt.az = std::atan2(p_sensor.y(), p_sensor.x()) + cfg.sigma_angle * rng.gaussian();
      tgt.el = std::asin(p_sensor.z() / r) + cfg.sigma_angle * rng.gaussian();
      const Eigen::Vector2d los = (p_world.head<2>() - cfg.sensor_pos.head<2>()).normalized();
      tgt.v_rad = (shared_v_rad ? center_v_rad : los.dot(vel)) + cfg.sigma_v * rng.gaussian();
      tgt.label = 0;
      frame.targets.push_back(tgt);
    }
    if (any_vehicle) ++vehicle_frames;

    // Clutter, half stationary and half moving.
    Pcg32 crng(cfg.seed, derive_stream("clutter", k));
    const int n_clutter = crng.poisson(cfg.clutter_rate);
    for (int i = 0; i < n_clutter; ++i) {
      SimTarget tgt;
      // Volume-uniform range: p(r) ~ r^2, so clutter does not pile up
      // near the sensor.
      const double r_lo = cfg.fov.r_min, r_hi = std::min(cfg.fov.r_max, 120.0);
      tgt.r = std::cbrt(r_lo * r_lo * r_lo +
                        crng.uniform() * (r_hi * r_hi * r_hi - r_lo * r_lo * r_lo));
      tgt.az = crng.uniform(cfg.fov.az_min, cfg.fov.az_max);
      tgt.el = crng.uniform(cfg.fov.el_min, cfg.fov.el_max);
      if (crng.uniform() < 0.5) {
        tgt.label = 1;
        tgt.v_rad = crng.uniform(-0.9, 0.9) * (0.1 / 3.6);
      } else {
        tgt.label = 2;
        tgt.v_rad = (crng.uniform() < 0.5 ? -1.0 : 1.0) * crng.uniform(1.0, 15.0);
      }
      frame.targets.push_back(tgt);
    }

    out.frames.push_back(std::move(frame));
  }

  if (vehicle_frames == 0)
    fail(ErrorCode::invalid_argument, "vehicle path never enters the sensor field of view");
  return out;
}

/// Writes radar.jsonl (spherical rows), pose.csv, labels.csv. truth.json
/// is written by the caller via the calibration writer.
inline void write_scenario_logs(const Scenario& scenario, const std::string& radar_path,
                                const std::string& pose_path, const std::string& labels_path) {
  {
    std::ofstream out(radar_path);
    if (!out) fail(ErrorCode::io_failure, "cannot write radar log: " + radar_path);
    out << "# schema=1\n";
    for (const auto& frame : scenario.frames) {
      nlohmann::ordered_json j;
      j["t_us"] = frame.t;
      auto& targets = j["targets"] = nlohmann::ordered_json::array();
      for (const auto& tgt : frame.targets) {
        nlohmann::ordered_json row;
        row["r"] = tgt.r;
        row["az"] = tgt.az;
        row["el"] = tgt.el;
        row["v_rad"] = tgt.v_rad;
        targets.push_back(std::move(row));
      }
      out << j.dump() << "\n";
    }
  }
  write_pose_log(pose_path, scenario.poses);
  {
    std::ofstream out(labels_path);
    if (!out) fail(ErrorCode::io_failure, "cannot write labels: " + labels_path);
    out << "t_us,target_idx,label\n";
    for (const auto& frame : scenario.frames)
      for (std::size_t i = 0; i < frame.targets.size(); ++i) {
        const char* name = frame.targets[i].label == 0 ? "vehicle"
                           : frame.targets[i].label == 1 ? "clutter_static"
                                                         : "clutter_moving";
        out << frame.t << "," << i << "," << name << "\n";
      }
  }
}

}  // namespace autocal
