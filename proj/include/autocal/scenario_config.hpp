#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "autocal/config.hpp"
#include "autocal/sim.hpp"

namespace autocal {

namespace detail {

inline void apply_scenario_entry(ScenarioConfig& cfg, const std::string& key,
                                 const std::string& value) {
  if (key == "canonical") return;  // handled by the caller
  if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "passes") cfg.passes = static_cast<int>(to_int(key, value));
  else if (key == "radar_rate_hz") cfg.radar_rate = to_double(key, value);
  else if (key == "pose_rate_hz") cfg.pose_rate = to_double(key, value);
  else if (key == "sigma_range_m") cfg.sigma_range = to_double(key, value);
  else if (key == "sigma_angle_deg") cfg.sigma_angle = deg2rad(to_double(key, value));
  else if (key == "sigma_v_mps") cfg.sigma_v = to_double(key, value);
  else if (key == "clutter_rate") cfg.clutter_rate = to_double(key, value);
  else if (key == "reflection_model") {
    if (value == "surface") cfg.reflection_model = ReflectionModel::surface;
    else if (value == "corners") cfg.reflection_model = ReflectionModel::corners;
    else fail(ErrorCode::parse_failure, "reflection_model must be surface or corners");
  } else if (key == "utm_zone") cfg.utm_zone = value;
  else if (key == "base_easting_m") cfg.base_easting = to_double(key, value);
  else if (key == "base_northing_m") cfg.base_northing = to_double(key, value);
  else if (key == "sensor_x_m") cfg.sensor_pos.x() = to_double(key, value);
  else if (key == "sensor_y_m") cfg.sensor_pos.y() = to_double(key, value);
  else if (key == "sensor_z_m") cfg.sensor_pos.z() = to_double(key, value);
  else if (key == "roll_deg") cfg.roll = deg2rad(to_double(key, value));
  else if (key == "pitch_deg") cfg.pitch = deg2rad(to_double(key, value));
  else if (key == "yaw_deg") cfg.yaw = deg2rad(to_double(key, value));
  else if (key == "locref_height_m") cfg.locref_height = to_double(key, value);
  else if (key == "vehicle.length_m") cfg.dims.length = to_double(key, value);
  else if (key == "vehicle.width_m") cfg.dims.width = to_double(key, value);
  else if (key == "vehicle.height_m") cfg.dims.height = to_double(key, value);
  else if (key == "vehicle.ref_offset_x_m") cfg.dims.ref_offset.x() = to_double(key, value);
  else if (key == "vehicle.ref_offset_y_m") cfg.dims.ref_offset.y() = to_double(key, value);
  else if (key == "vehicle.ref_offset_z_m") cfg.dims.ref_offset.z() = to_double(key, value);
  else if (key == "fov_az_min_deg") cfg.fov.az_min = deg2rad(to_double(key, value));
  else if (key == "fov_az_max_deg") cfg.fov.az_max = deg2rad(to_double(key, value));
  else if (key == "fov_el_min_deg") cfg.fov.el_min = deg2rad(to_double(key, value));
  else if (key == "fov_el_max_deg") cfg.fov.el_max = deg2rad(to_double(key, value));
  else if (key == "fov_r_min_m") cfg.fov.r_min = to_double(key, value);
  else if (key == "fov_r_max_m") cfg.fov.r_max = to_double(key, value);
  else if (key == "t0_us") cfg.t0 = to_int(key, value);
  else if (key == "path") {
    // Semicolon-separated "x y v" triples.
    cfg.waypoints.clear();
    cfg.speeds.clear();
    std::stringstream ss(value);
    std::string triple;
    while (std::getline(ss, triple, ';')) {
      std::stringstream ts(triple);
      double x, y, v;
      if (!(ts >> x >> y >> v))
        fail(ErrorCode::parse_failure, "path entries must be 'x y v' triples: " + triple);
      cfg.waypoints.emplace_back(x, y);
      cfg.speeds.push_back(v);
    }
  } else {
    fail(ErrorCode::parse_failure, "unknown scenario key: " + key);
  }
}

}  // namespace detail

/// Scenario file: flat key = value lines. 'canonical = true' loads the
/// canonical stadium-loop fixture first; any other keys override it.
inline ScenarioConfig load_scenario_config(const std::string& path) {
  const auto entries = detail::parse_kv_file(path);
  ScenarioConfig cfg;
  for (const auto& [key, value] : entries)
    if (key == "canonical" && detail::to_bool(key, value)) cfg = canonical_scenario();
  for (const auto& [key, value] : entries) detail::apply_scenario_entry(cfg, key, value);
  if (cfg.waypoints.empty())
    fail(ErrorCode::parse_failure, path + ": scenario needs a path (or canonical = true)");
  return cfg;
}

}  // namespace autocal
