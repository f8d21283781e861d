#include <catch2/catch_amalgamated.hpp>

#include "autocal/eval.hpp"
#include "autocal/rng.hpp"
#include "test_support.hpp"

using namespace autocal;
using testsupport::TempDir;
using testsupport::throws_code;

namespace {

/// Evaluation fixture: one vehicle track driving +x at y = 8, sensor at
/// the origin with identity calibration, poses at the cluster times.
struct EvalFixture {
  std::vector<RadarFrame> frames;
  std::vector<ObjectTrack> tracks;
  PoseTrack poses;
  VehicleDims dims{4.0, 2.0, 1.6, Eigen::Vector3d::Zero()};
  Calibration calib;

  ObjectTrack& track() { return tracks[0]; }

  EvalFixture() {
    calib.t = {0, 0, 5};
    tracks.emplace_back();
    tracks[0].id = 0;
    poses.nominal_rate_hz = 15.0;
  }

  /// Adds one observation with explicit member target positions given in
  /// the world frame (identity rotation, so p_sensor = world - t).
  void add_observation(double veh_x, const std::vector<Eigen::Vector3d>& targets) {
    const TimeUs t = 1000000 + static_cast<TimeUs>(tracks[0].observations.size()) * 66667;
    VehiclePose pose;
    pose.t = t;
    pose.p_world = {veh_x, 8.0, 0.3};
    poses.samples.push_back(pose);

    RadarFrame frame;
    frame.t = t;
    TargetCluster cluster;
    cluster.t = t;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      RadarTarget tgt;
      tgt.t = t;
      tgt.p_sensor = targets[i] - calib.t;
      tgt.v_rad = 2.0;
      frame.targets.push_back(tgt);
      cluster.members.push_back({frames.size(), i});
      sum += tgt.p_sensor;
    }
    cluster.centroid = sum / static_cast<double>(targets.size());
    frames.push_back(frame);
    tracks[0].observations.push_back(cluster);
  }
};

}  // namespace

TEST_CASE("associate_eval_tracks thresholds") {
  EvalFixture fx;
  for (int k = 0; k < 10; ++k)
    fx.add_observation(20 + 0.3 * k, {{20 + 0.3 * k + 0.4, 8.0, 0.5}});  // 0.4 m offset

  SECTION("close track accepted") {
    const auto accepted = associate_eval_tracks(fx.tracks, fx.poses, fx.calib, 5.0, 50000);
    CHECK(accepted.size() == 1);
  }

  SECTION("bystander track rejected") {
    EvalFixture far;
    for (int k = 0; k < 10; ++k)
      far.add_observation(20 + 0.3 * k, {{20 + 0.3 * k, 20.0, 0.5}});  // 12 m off
    CHECK(throws_code(
        [&] { associate_eval_tracks(far.tracks, far.poses, far.calib, 5.0, 50000); },
        ErrorCode::insufficient_overlap));
  }

  SECTION("threshold equal to the mean offset rejects (strict accept)") {
    EvalFixture edge;
    for (int k = 0; k < 10; ++k)
      edge.add_observation(20 + 0.3 * k, {{20 + 0.3 * k, 10.0, 0.5}});  // exactly 2 m
    CHECK(throws_code([&] { associate_eval_tracks(edge.tracks, edge.poses, edge.calib, 2.0, 50000); },
                      ErrorCode::insufficient_overlap));
    const auto accepted = associate_eval_tracks(edge.tracks, edge.poses, edge.calib, 2.0 + 1e-9,
                                                50000);
    CHECK(accepted.size() == 1);
  }
}

TEST_CASE("compute_metrics trivial cases") {
  SECTION("all targets inside") {
    EvalFixture fx;
    for (int k = 0; k < 5; ++k) {
      const double x = 20 + 0.3 * k;
      fx.add_observation(x, {{x + 0.5, 8.2, 0.5}, {x - 0.5, 7.8, 0.5}});
    }
    const Metrics m = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);
    CHECK(m.r_i_pct == 100.0);
    CHECK(m.delta_op_m == 0.0);
    CHECK(m.n_targets == 10);
    CHECK(m.n_inliers == 10);
    CHECK(m.per_target.size() == 10);
  }

  SECTION("one inside, one 0.5 m outside gives exact values") {
    EvalFixture fx;
    // Footprint corners at x = 20 +/- 2, y = 8 +/- 1. Outside target 0.5 m
    // beyond the (22, 9) corner along +x so the nearest-vertex distance is
    // exactly 0.5.
    fx.add_observation(20, {{20.0, 8.0, 0.5}, {22.5, 9.0, 0.5}});
    const Metrics m = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);
    CHECK(m.r_i_pct == Catch::Approx(50.0));
    CHECK(m.delta_op_m == Catch::Approx(0.5));
    CHECK(m.n_targets == 2);
    CHECK(m.n_inliers == 1);
  }

  SECTION("delta_p is the nearest-target to nearest-corner distance") {
    EvalFixture fx;
    // Nearest-to-sensor member is (18.5, 7.5); the footprint corner
    // nearest the sensor (origin) is (18, 7).
    fx.add_observation(20, {{18.5, 7.5, 0.5}, {21.0, 8.5, 0.5}});
    const Metrics m = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);
    CHECK(m.delta_p_m == Catch::Approx(std::hypot(0.5, 0.5)));
    std::size_t with_dp = 0;
    for (const auto& d : m.per_target) with_dp += d.delta_p_m.has_value() ? 1 : 0;
    CHECK(with_dp == 1);
  }

  SECTION("elevated clutter is excluded by the height gate") {
    EvalFixture fx;
    fx.add_observation(20, {{20.0, 8.0, 0.5}, {20.3, 8.2, 0.9}, {20.0, 8.0, 30.0}});
    const Metrics m = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);
    CHECK(m.n_targets == 2);
    CHECK(m.r_i_pct == 100.0);
  }

  SECTION("removing an inside target never changes delta_op") {
    EvalFixture fx;
    fx.add_observation(20, {{20.0, 8.0, 0.5}, {22.5, 9.0, 0.5}, {19.5, 8.3, 0.5}});
    const Metrics with_inside =
        compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);

    EvalFixture fewer;
    fewer.add_observation(20, {{20.0, 8.0, 0.5}, {22.5, 9.0, 0.5}});
    const Metrics without =
        compute_metrics(fewer.tracks, fewer.frames, fewer.poses, fewer.dims, fewer.calib, 50000);
    CHECK(with_inside.delta_op_m == Catch::Approx(without.delta_op_m));
  }
}

TEST_CASE("metrics are invariant under a global rigid motion") {
  // Apply the same yaw+translation to the calibration and the poses.
  EvalFixture fx;
  Pcg32 rng(9, 0);
  for (int k = 0; k < 8; ++k) {
    const double x = 20 + 0.3 * k;
    fx.add_observation(x, {{x + rng.uniform(-1, 1), 8 + rng.uniform(-1.5, 1.5), 0.5},
                           {x + rng.uniform(-2.4, 2.4), 8 + rng.uniform(-0.8, 0.8), 0.6}});
  }
  const Metrics base = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);

  const double g_yaw = 0.7;
  const Eigen::Matrix3d G = rot_z(g_yaw);
  const Eigen::Vector3d g_t(15, -9, 2);
  EvalFixture moved = fx;
  moved.calib.R = G * fx.calib.R;
  moved.calib.t = G * fx.calib.t + g_t;
  for (auto& pose : moved.poses.samples) {
    pose.p_world = G * pose.p_world + g_t;
    pose.rpy.z() = wrap_angle(pose.rpy.z() + g_yaw);
  }
  const Metrics after =
      compute_metrics(moved.tracks, moved.frames, moved.poses, moved.dims, moved.calib, 50000);

  CHECK(after.r_i_pct == Catch::Approx(base.r_i_pct).margin(1e-9));
  CHECK(after.delta_op_m == Catch::Approx(base.delta_op_m).margin(1e-9));
  CHECK(after.delta_p_m == Catch::Approx(base.delta_p_m).margin(1e-9));
  CHECK(after.n_targets == base.n_targets);
}

TEST_CASE("metrics and diagnostics files") {
  EvalFixture fx;
  fx.add_observation(20, {{20.0, 8.0, 0.5}, {22.5, 9.0, 0.5}});
  const Metrics m = compute_metrics(fx.tracks, fx.frames, fx.poses, fx.dims, fx.calib, 50000);

  TempDir dir;
  write_metrics_json(dir.file("metrics.json"), m);
  write_diagnostics_csv(dir.file("diag.csv"), m);

  std::ifstream json_in(dir.file("metrics.json"));
  nlohmann::json j;
  json_in >> j;
  CHECK(j.at("r_i_pct").get<double>() == Catch::Approx(50.0));
  CHECK(j.at("n_targets").get<int>() == 2);

  std::ifstream csv_in(dir.file("diag.csv"));
  std::string header;
  std::getline(csv_in, header);
  CHECK(header == "t_us,track_id,range_m,inside,loss_m,delta_p_m");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(csv_in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == m.per_target.size());
}
