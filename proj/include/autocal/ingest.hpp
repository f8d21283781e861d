#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autocal/error.hpp"
#include "autocal/geometry.hpp"
#include "autocal/types.hpp"

namespace autocal {

/// Time-sorted vehicle localization trace. Gaps larger than five nominal
/// periods are recorded as discontinuities; interpolation never bridges
/// them.
struct PoseTrack {
  std::vector<VehiclePose> samples;
  double nominal_rate_hz = 0.0;
  UtmOrigin origin;
  // Index i marks a discontinuity between samples[i] and samples[i+1].
  std::vector<std::size_t> discontinuities;

  bool is_discontinuity(std::size_t i) const {
    return std::binary_search(discontinuities.begin(), discontinuities.end(), i);
  }
};

struct SessionMeta {
  UtmOrigin origin;
  TimeUs t_begin = 0;
  TimeUs t_end = 0;
  std::string sensor_id;
};

struct RecordingSession {
  std::vector<RadarFrame> radar;
  PoseTrack pose;
  SessionMeta meta;
};

enum class PoseInterp { interpolate, nearest };

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

inline void check_schema_line(const std::string& line, const std::string& path) {
  if (trim(line) != "# schema=1")
    fail(ErrorCode::bad_schema, path + ": first line must be '# schema=1'");
}

inline double period_us(double rate_hz) { return 1e6 / rate_hz; }

/// Median inter-sample interval, used as the nominal period estimate.
inline double estimate_rate_hz(const std::vector<VehiclePose>& samples) {
  if (samples.size() < 2) return 0.0;
  std::vector<TimeUs> dts;
  dts.reserve(samples.size() - 1);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    dts.push_back(samples[i + 1].t - samples[i].t);
  std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
  const double median_dt = static_cast<double>(dts[dts.size() / 2]);
  return median_dt > 0 ? 1e6 / median_dt : 0.0;
}

}  // namespace detail

/// Reads a JSON-lines radar log (one frame per line, leading '# schema=1'
/// line). Rows may be spherical {r, az, el} or Cartesian {x, y, z};
/// spherical rows are converted via x = r cos(el) cos(az),
/// y = r cos(el) sin(az), z = r sin(el).
inline std::vector<RadarFrame> read_radar_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_failure, "cannot open radar log: " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::empty_input, path + ": empty file");
  ++line_no;
  detail::check_schema_line(line, path);

  std::vector<RadarFrame> frames;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse_failure, where + ": " + e.what());
    }

    RadarFrame frame;
    try {
      frame.t = j.at("t_us").get<TimeUs>();
      if (frame.t <= 0) fail(ErrorCode::parse_failure, where + ": t_us must be positive");
      for (const auto& row : j.at("targets")) {
        RadarTarget tgt;
        tgt.t = frame.t;
        const bool spherical = row.contains("r");
        const bool cartesian = row.contains("x");
        if (spherical == cartesian)
          fail(ErrorCode::parse_failure, where + ": target must have either r/az/el or x/y/z");
        if (spherical) {
          const double r = row.at("r").get<double>();
          const double az = row.at("az").get<double>();
          const double el = row.at("el").get<double>();
          if (!(r > 0) || !std::isfinite(az) || !std::isfinite(el))
            fail(ErrorCode::parse_failure, where + ": invalid spherical coordinates");
          tgt.p_sensor = {r * std::cos(el) * std::cos(az),
                          r * std::cos(el) * std::sin(az),
                          r * std::sin(el)};
        } else {
          tgt.p_sensor = {row.at("x").get<double>(), row.at("y").get<double>(),
                          row.at("z").get<double>()};
        }
        if (!tgt.p_sensor.allFinite() || tgt.p_sensor.norm() <= 0)
          fail(ErrorCode::parse_failure, where + ": target position must be finite with range > 0");
        tgt.v_rad = row.at("v_rad").get<double>();
        if (!std::isfinite(tgt.v_rad))
          fail(ErrorCode::parse_failure, where + ": v_rad must be finite");
        if (row.contains("rcs")) tgt.rcs = row.at("rcs").get<double>();
        frame.targets.push_back(std::move(tgt));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse_failure, where + ": " + e.what());
    }

    if (!frames.empty() && frame.t <= frames.back().t)
      fail(ErrorCode::parse_failure, where + ": non-monotonic frame timestamp");
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) fail(ErrorCode::empty_input, path + ": no radar frames");
  return frames;
}

/// Writes frames in the radar JSON-lines schema. When spherical is true,
/// Cartesian positions are converted back to r/az/el rows.
inline void write_radar_log(const std::string& path, const std::vector<RadarFrame>& frames,
                            bool spherical = false) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write radar log: " + path);
  out << "# schema=1\n";
  for (const auto& frame : frames) {
    nlohmann::ordered_json j;
    j["t_us"] = frame.t;
    auto& targets = j["targets"] = nlohmann::ordered_json::array();
    for (const auto& tgt : frame.targets) {
      nlohmann::ordered_json row;
      if (spherical) {
        const double r = tgt.p_sensor.norm();
        row["r"] = r;
        row["az"] = std::atan2(tgt.p_sensor.y(), tgt.p_sensor.x());
        row["el"] = std::asin(tgt.p_sensor.z() / r);
      } else {
        row["x"] = tgt.p_sensor.x();
        row["y"] = tgt.p_sensor.y();
        row["z"] = tgt.p_sensor.z();
      }
      row["v_rad"] = tgt.v_rad;
      if (tgt.rcs) row["rcs"] = *tgt.rcs;
      targets.push_back(std::move(row));
    }
    out << j.dump() << "\n";
  }
}

/// Reads the pose CSV (header: t_us,utm_zone,easting,northing,altitude,
/// roll,pitch,yaw). Positions are shifted by the origin = first sample's
/// easting/northing floored to whole meters.
inline PoseTrack read_pose_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_failure, "cannot open pose log: " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::empty_input, path + ": empty file");
  ++line_no;
  detail::check_schema_line(line, path);
  if (!std::getline(in, line)) fail(ErrorCode::empty_input, path + ": missing header");
  ++line_no;
  if (detail::trim(line) != "t_us,utm_zone,easting,northing,altitude,roll,pitch,yaw")
    fail(ErrorCode::bad_schema, path + ": unexpected pose CSV header");

  PoseTrack track;
  bool have_origin = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(detail::trim(field));
    if (fields.size() != 8) fail(ErrorCode::parse_failure, where + ": expected 8 fields");

    VehiclePose pose;
    std::string zone = fields[1];
    try {
      pose.t = std::stoll(fields[0]);
      const double e = std::stod(fields[2]);
      const double n = std::stod(fields[3]);
      const double alt = std::stod(fields[4]);
      pose.rpy = {std::stod(fields[5]), std::stod(fields[6]), std::stod(fields[7])};
      if (!have_origin) {
        track.origin = {zone, std::floor(e), std::floor(n)};
        have_origin = true;
      }
      pose.p_world = {e - track.origin.easting, n - track.origin.northing, alt};
    } catch (const std::exception&) {
      fail(ErrorCode::parse_failure, where + ": malformed numeric field");
    }
    if (pose.t <= 0) fail(ErrorCode::parse_failure, where + ": t_us must be positive");
    if (zone.empty() || zone != track.origin.zone)
      fail(ErrorCode::parse_failure, where + ": inconsistent UTM zone");
    if (!pose.p_world.allFinite())
      fail(ErrorCode::parse_failure, where + ": non-finite position");
    for (int i = 0; i < 3; ++i) {
      const double a = pose.rpy[i];
      if (!std::isfinite(a) || a > kPi || a <= -kPi)
        fail(ErrorCode::parse_failure, where + ": rpy angle out of (-pi, pi]");
    }
    if (!track.samples.empty() && pose.t <= track.samples.back().t)
      fail(ErrorCode::parse_failure, where + ": non-increasing pose timestamp");
    track.samples.push_back(pose);
  }
  if (track.samples.empty()) fail(ErrorCode::empty_input, path + ": no pose samples");

  track.nominal_rate_hz = detail::estimate_rate_hz(track.samples);
  if (track.nominal_rate_hz > 0) {
    const double max_gap = 5.0 * detail::period_us(track.nominal_rate_hz);
    for (std::size_t i = 0; i + 1 < track.samples.size(); ++i)
      if (static_cast<double>(track.samples[i + 1].t - track.samples[i].t) > max_gap)
        track.discontinuities.push_back(i);
  }
  return track;
}

/// Writes the pose track with origin shift undone. Fixed decimal widths
/// keep read-write-read round trips lossless at 1e-4 m / 1e-7 rad.
inline void write_pose_log(const std::string& path, const PoseTrack& track) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_failure, "cannot write pose log: " + path);
  out << "# schema=1\n";
  out << "t_us,utm_zone,easting,northing,altitude,roll,pitch,yaw\n";
  char buf[256];
  for (const auto& pose : track.samples) {
    std::snprintf(buf, sizeof(buf), "%lld,%s,%.6f,%.6f,%.6f,%.9f,%.9f,%.9f\n",
                  static_cast<long long>(pose.t), track.origin.zone.c_str(),
                  pose.p_world.x() + track.origin.easting,
                  pose.p_world.y() + track.origin.northing, pose.p_world.z(),
                  pose.rpy.x(), pose.rpy.y(), pose.rpy.z());
    out << buf;
  }
}

/// Pose lookup at an arbitrary timestamp. In interpolate mode the position
/// is a convex combination of the bracketing samples and each rpy angle is
/// interpolated along the shortest arc; requests farther than max_dt from
/// any sample, outside the track span by more than max_dt, or inside a
/// recorded discontinuity fail with no_pose_available.
inline VehiclePose pose_at(const PoseTrack& track, TimeUs t, TimeUs max_dt_us,
                           PoseInterp mode = PoseInterp::interpolate) {
  if (track.samples.empty()) fail(ErrorCode::invalid_argument, "pose track is empty");
  const auto& s = track.samples;

  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const VehiclePose& p, TimeUs ts) { return p.t < ts; });
  if (it != s.end() && it->t == t) return *it;  // exact hit

  if (mode == PoseInterp::nearest) {
    const VehiclePose* best = nullptr;
    if (it != s.end()) best = &*it;
    if (it != s.begin()) {
      const VehiclePose* lo = &*(it - 1);
      if (!best || t - lo->t < best->t - t) best = lo;
    }
    if (std::llabs(best->t - t) > max_dt_us)
      fail(ErrorCode::no_pose_available,
           "no pose within max_dt of t=" + std::to_string(t));
    return *best;
  }

  if (it == s.begin()) {
    if (s.front().t - t > max_dt_us)
      fail(ErrorCode::no_pose_available, "t before pose track span: " + std::to_string(t));
    return s.front();
  }
  if (it == s.end()) {
    if (t - s.back().t > max_dt_us)
      fail(ErrorCode::no_pose_available, "t after pose track span: " + std::to_string(t));
    return s.back();
  }

  const std::size_t hi = static_cast<std::size_t>(it - s.begin());
  const std::size_t lo = hi - 1;
  if (track.is_discontinuity(lo))
    fail(ErrorCode::no_pose_available,
         "t inside a pose discontinuity: " + std::to_string(t));
  if (std::min(t - s[lo].t, s[hi].t - t) > max_dt_us)
    fail(ErrorCode::no_pose_available,
         "no pose within max_dt of t=" + std::to_string(t));

  const double u = static_cast<double>(t - s[lo].t) / static_cast<double>(s[hi].t - s[lo].t);
  VehiclePose out;
  out.t = t;
  out.p_world = (1.0 - u) * s[lo].p_world + u * s[hi].p_world;
  for (int i = 0; i < 3; ++i)
    out.rpy[i] = wrap_angle(s[lo].rpy[i] + u * wrap_angle(s[hi].rpy[i] - s[lo].rpy[i]));
  return out;
}

inline RecordingSession load_session(const std::string& radar_path, const std::string& pose_path,
                                     const std::string& sensor_id = "") {
  RecordingSession session;
  session.radar = read_radar_log(radar_path);
  session.pose = read_pose_log(pose_path);
  session.meta.origin = session.pose.origin;
  session.meta.sensor_id = sensor_id;
  session.meta.t_begin = std::min(session.radar.front().t, session.pose.samples.front().t);
  session.meta.t_end = std::max(session.radar.back().t, session.pose.samples.back().t);
  return session;
}

}  // namespace autocal
