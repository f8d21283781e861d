#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "autocal/cluster.hpp"
#include "autocal/error.hpp"
#include "autocal/hypothesis.hpp"
#include "autocal/ingest.hpp"
#include "autocal/track.hpp"
#include "autocal/types.hpp"

namespace autocal {

/// All pipeline tunables, with the module defaults. Loaded from a flat
/// key = value file ('#' comments) plus --set overrides; unknown keys are
/// rejected.
struct PipelineConfig {
  TimeUs max_dt_us = 50000;  // pose lookup tolerance, 50 ms
  PoseInterp pose_mode = PoseInterp::interpolate;

  ClusterParams cluster;

  double ground_radius_m = 1.0;
  double ground_keep_fraction = 0.2;

  NoiseSpec noise;
  std::size_t min_track_length = 5;

  double hyp_eps_t_m = 1.0;
  std::size_t hyp_min_pts = 2;
  ElevationMode elevation_mode = ElevationMode::zero;

  bool refine_enabled = true;
  double eval_reject_threshold_m = 5.0;

  VehicleDims dims;
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_failure, "cannot open config: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::parse_failure,
           path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      fail(ErrorCode::parse_failure,
           path + ":" + std::to_string(line_no) + ": empty key or value");
    entries.emplace_back(key, value);
  }
  return entries;
}

inline std::pair<std::string, std::string> parse_kv_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    fail(ErrorCode::invalid_argument, "--set expects key=value, got: " + spec);
  return {trim(spec.substr(0, eq)), trim(spec.substr(eq + 1))};
}

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return d;
  } catch (const std::exception&) {
    fail(ErrorCode::parse_failure, "config key '" + key + "': not a number: " + value);
  }
}

inline long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::parse_failure, "config key '" + key + "': not an integer: " + value);
  }
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCode::parse_failure, "config key '" + key + "': not a bool: " + value);
}

}  // namespace detail

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  if (key == "ingest.max_dt_ms") {
    cfg.max_dt_us = static_cast<TimeUs>(to_double(key, value) * 1000.0);
  } else if (key == "ingest.pose_mode") {
    if (value == "interpolate") cfg.pose_mode = PoseInterp::interpolate;
    else if (value == "nearest") cfg.pose_mode = PoseInterp::nearest;
    else fail(ErrorCode::parse_failure, "ingest.pose_mode must be interpolate or nearest");
  } else if (key == "cluster.v_min_mps") {
    cfg.cluster.v_min = to_double(key, value);
  } else if (key == "cluster.eps_m") {
    cfg.cluster.eps = to_double(key, value);
  } else if (key == "cluster.min_pts") {
    cfg.cluster.min_pts = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "cluster.lambda_v_s") {
    cfg.cluster.lambda_v = to_double(key, value);
  } else if (key == "cluster.window") {
    cfg.cluster.window = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "cluster.gate_m") {
    cfg.cluster.gate = to_double(key, value);
  } else if (key == "ground.radius_m") {
    cfg.ground_radius_m = to_double(key, value);
  } else if (key == "ground.keep_fraction") {
    cfg.ground_keep_fraction = to_double(key, value);
  } else if (key == "track.sigma_jerk") {
    cfg.noise.sigma_jerk = to_double(key, value);
  } else if (key == "track.sigma_omega_dot") {
    cfg.noise.sigma_omega_dot = to_double(key, value);
  } else if (key == "track.sigma_meas_m") {
    cfg.noise.sigma_meas = to_double(key, value);
  } else if (key == "track.min_length") {
    cfg.min_track_length = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "hypothesis.eps_t_m") {
    cfg.hyp_eps_t_m = to_double(key, value);
  } else if (key == "hypothesis.min_pts") {
    cfg.hyp_min_pts = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "hypothesis.elevation_mode") {
    if (value == "zero") cfg.elevation_mode = ElevationMode::zero;
    else if (value == "raw") cfg.elevation_mode = ElevationMode::raw;
    else fail(ErrorCode::parse_failure, "hypothesis.elevation_mode must be zero or raw");
  } else if (key == "refine.enabled") {
    cfg.refine_enabled = to_bool(key, value);
  } else if (key == "eval.reject_threshold_m") {
    cfg.eval_reject_threshold_m = to_double(key, value);
  } else if (key == "vehicle.length_m") {
    cfg.dims.length = to_double(key, value);
  } else if (key == "vehicle.width_m") {
    cfg.dims.width = to_double(key, value);
  } else if (key == "vehicle.height_m") {
    cfg.dims.height = to_double(key, value);
  } else if (key == "vehicle.ref_offset_x_m") {
    cfg.dims.ref_offset.x() = to_double(key, value);
  } else if (key == "vehicle.ref_offset_y_m") {
    cfg.dims.ref_offset.y() = to_double(key, value);
  } else if (key == "vehicle.ref_offset_z_m") {
    cfg.dims.ref_offset.z() = to_double(key, value);
  } else {
    fail(ErrorCode::parse_failure, "unknown config key: " + key);
  }
}

inline void validate_config(const PipelineConfig& cfg) {
  if (cfg.max_dt_us <= 0) fail(ErrorCode::invalid_argument, "ingest.max_dt_ms must be > 0");
  if (!(cfg.cluster.eps > 0)) fail(ErrorCode::invalid_argument, "cluster.eps_m must be > 0");
  if (cfg.cluster.min_pts < 1) fail(ErrorCode::invalid_argument, "cluster.min_pts must be >= 1");
  if (cfg.cluster.window < 1) fail(ErrorCode::invalid_argument, "cluster.window must be >= 1");
  if (cfg.cluster.lambda_v < 0) fail(ErrorCode::invalid_argument, "cluster.lambda_v_s must be >= 0");
  if (cfg.cluster.v_min < 0) fail(ErrorCode::invalid_argument, "cluster.v_min_mps must be >= 0");
  if (!(cfg.ground_radius_m > 0)) fail(ErrorCode::invalid_argument, "ground.radius_m must be > 0");
  if (!(cfg.ground_keep_fraction > 0 && cfg.ground_keep_fraction < 1))
    fail(ErrorCode::invalid_argument, "ground.keep_fraction must be in (0, 1)");
  if (!(cfg.dims.length > 0 && cfg.dims.width > 0 && cfg.dims.height > 0))
    fail(ErrorCode::invalid_argument, "vehicle dimensions must be > 0");
  if (cfg.min_track_length < 2)
    fail(ErrorCode::invalid_argument, "track.min_length must be >= 2");
  if (!(cfg.hyp_eps_t_m > 0)) fail(ErrorCode::invalid_argument, "hypothesis.eps_t_m must be > 0");
  if (cfg.hyp_min_pts < 1) fail(ErrorCode::invalid_argument, "hypothesis.min_pts must be >= 1");
}

/// Loads an optional config file, then applies --set overrides in order.
inline PipelineConfig load_pipeline_config(const std::string& path,
                                           const std::vector<std::string>& overrides = {}) {
  PipelineConfig cfg;
  if (!path.empty())
    for (const auto& [key, value] : detail::parse_kv_file(path))
      apply_config_entry(cfg, key, value);
  for (const auto& spec : overrides) {
    const auto [key, value] = detail::parse_kv_override(spec);
    apply_config_entry(cfg, key, value);
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace autocal
