#include <catch2/catch_amalgamated.hpp>

#include "autocal/refine.hpp"
#include "autocal/rng.hpp"
#include "test_support.hpp"

using namespace autocal;
using testsupport::throws_code;

namespace {

double signed_area(const VehicleFootprint& fp) {
  double a = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = fp.corners[i];
    const auto& q = fp.corners[(i + 1) % 4];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

VehicleFootprint square_footprint(double cx, double cy, double half = 1.0) {
  VehiclePose pose;
  pose.p_world = {cx, cy, 0};
  VehicleDims dims{2 * half, 2 * half, 1.5, Eigen::Vector3d::Zero()};
  return vehicle_footprint(pose, dims);
}

}  // namespace

TEST_CASE("vehicle_footprint geometry") {
  VehicleDims dims{4.0, 2.0, 1.5, Eigen::Vector3d::Zero()};

  SECTION("axis-aligned box at the origin") {
    VehiclePose pose;
    const VehicleFootprint fp = vehicle_footprint(pose, dims);
    const std::set<std::pair<double, double>> expected{{2, 1}, {-2, 1}, {-2, -1}, {2, -1}};
    std::set<std::pair<double, double>> got;
    for (const auto& c : fp.corners) got.insert({c.x(), c.y()});
    CHECK(got == expected);
    CHECK(signed_area(fp) == Catch::Approx(8.0));  // CCW, area = L*W
  }

  SECTION("yaw 90 swaps the extents") {
    VehiclePose pose;
    pose.rpy = {0, 0, kPi / 2};
    const VehicleFootprint fp = vehicle_footprint(pose, dims);
    double max_x = 0, max_y = 0;
    for (const auto& c : fp.corners) {
      max_x = std::max(max_x, std::abs(c.x()));
      max_y = std::max(max_y, std::abs(c.y()));
    }
    CHECK(max_x == Catch::Approx(1.0));
    CHECK(max_y == Catch::Approx(2.0));
    CHECK(signed_area(fp) > 0);
  }

  SECTION("yaw 30 with ref_offset matches a 2D rotation oracle") {
    const double yaw = deg2rad(30.0);
    VehiclePose pose;
    pose.p_world = {10, 20, 0};
    pose.rpy = {0, 0, yaw};
    VehicleDims offset_dims = dims;
    offset_dims.ref_offset = {1.3, 0, 0};
    const VehicleFootprint fp = vehicle_footprint(pose, offset_dims);

    const double c = std::cos(yaw), s = std::sin(yaw);
    auto rot = [&](double x, double y) {
      return Eigen::Vector2d(c * x - s * y, s * x + c * y);
    };
    const Eigen::Vector2d center = Eigen::Vector2d(10, 20) + rot(1.3, 0);
    const std::array<Eigen::Vector2d, 4> expected{
        center + rot(2, 1), center + rot(-2, 1), center + rot(-2, -1), center + rot(2, -1)};
    for (std::size_t i = 0; i < 4; ++i) CHECK((fp.corners[i] - expected[i]).norm() < 1e-12);
  }

  SECTION("counter-clockwise for every yaw") {
    for (double yaw = -kPi; yaw < kPi; yaw += 0.1) {
      VehiclePose pose;
      pose.rpy = {0, 0, yaw};
      CHECK(signed_area(vehicle_footprint(pose, dims)) > 0);
    }
  }
}

TEST_CASE("polygon_loss") {
  const VehicleFootprint fp = square_footprint(0, 0, 1.0);

  CHECK(polygon_loss({0, 0}, fp) == 0.0);
  CHECK(polygon_loss({1.0, 0.0}, fp) == 0.0);  // boundary-inclusive
  CHECK(polygon_loss({1.0, 1.0}, fp) == 0.0);  // corner
  // Outside: distance to the nearest vertex, not the nearest edge.
  CHECK(polygon_loss({2.0, 0.0}, fp) == Catch::Approx(std::sqrt(2.0)));
  CHECK(polygon_loss({3.0, 1.0}, fp) == Catch::Approx(2.0));

  SECTION("translation equivariance") {
    Pcg32 rng(3, 0);
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector2d p(rng.uniform(-4, 4), rng.uniform(-4, 4));
      const Eigen::Vector2d u(rng.uniform(-50, 50), rng.uniform(-50, 50));
      const VehicleFootprint moved = square_footprint(u.x(), u.y(), 1.0);
      CHECK(polygon_loss(p + u, moved) == Catch::Approx(polygon_loss(p, fp)).margin(1e-9));
    }
  }

  SECTION("zero exactly on the closed polygon") {
    Pcg32 rng(4, 0);
    for (int i = 0; i < 500; ++i) {
      const Eigen::Vector2d p(rng.uniform(-2, 2), rng.uniform(-2, 2));
      const bool inside = std::abs(p.x()) <= 1.0 && std::abs(p.y()) <= 1.0;
      if (inside)
        CHECK(polygon_loss(p, fp) == 0.0);
      else
        CHECK(polygon_loss(p, fp) > 0.0);
    }
  }
}

TEST_CASE("optimize_planar_offset") {
  SECTION("already-contained targets stay put") {
    Pcg32 rng(5, 0);
    std::vector<RefinePair> pairs;
    for (int i = 0; i < 50; ++i) {
      RefinePair pair;
      pair.fp = square_footprint(rng.uniform(-20, 20), rng.uniform(-20, 20), 1.0);
      const Eigen::Vector2d center =
          0.25 * (pair.fp.corners[0] + pair.fp.corners[1] + pair.fp.corners[2] + pair.fp.corners[3]);
      pair.target_xy = center + Eigen::Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      pairs.push_back(pair);
    }
    const PlanarOffset offset = optimize_planar_offset(pairs);
    CHECK(std::hypot(offset.dx, offset.dy) < 1e-3);
    CHECK(offset.converged);
  }

  SECTION("uniform displacement is recovered") {
    // Footprints at random yaws with antithetic boundary-straddling
    // scatter: the only offset coherent across all pairs is the negative
    // displacement (the vertex loss is corner-seeking for any single
    // footprint orientation, so orientations must vary, as they do for a
    // real pass).
    Pcg32 rng(6, 0);
    std::vector<RefinePair> pairs;
    for (int i = 0; i < 150; ++i) {
      VehiclePose pose;
      pose.p_world = {rng.uniform(-30, 30), rng.uniform(-30, 30), 0};
      pose.rpy = {0, 0, rng.uniform(-kPi, kPi)};
      const VehicleDims dims{2.0, 2.0, 1.5, Eigen::Vector3d::Zero()};
      RefinePair pair;
      pair.fp = vehicle_footprint(pose, dims);
      const Eigen::Vector2d scatter(rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4));
      pair.target_xy = pose.p_world.head<2>() + Eigen::Vector2d(1.0, 0.0) + scatter;
      pairs.push_back(pair);
      RefinePair mirrored = pair;
      mirrored.target_xy = pose.p_world.head<2>() + Eigen::Vector2d(1.0, 0.0) - scatter;
      pairs.push_back(mirrored);
    }
    const PlanarOffset offset = optimize_planar_offset(pairs);
    CHECK(std::abs(offset.dx + 1.0) < 0.05);
    CHECK(std::abs(offset.dy) < 0.05);
  }

  SECTION("result beats a dense grid") {
    Pcg32 rng(7, 0);
    std::vector<RefinePair> pairs;
    for (int i = 0; i < 50; ++i) {
      RefinePair pair;
      pair.fp = square_footprint(rng.uniform(-10, 10), rng.uniform(-10, 10), 0.8);
      const Eigen::Vector2d center =
          0.25 * (pair.fp.corners[0] + pair.fp.corners[1] + pair.fp.corners[2] + pair.fp.corners[3]);
      pair.target_xy = center + Eigen::Vector2d(rng.gaussian(1.2, 0.5), rng.gaussian(-0.8, 0.5));
      pairs.push_back(pair);
    }
    auto total = [&](const Eigen::Vector2d& o) {
      double sum = 0;
      for (const auto& p : pairs) sum += polygon_loss(p.target_xy + o, p.fp);
      return sum;
    };
    const PlanarOffset offset = optimize_planar_offset(pairs);
    const double got = total({offset.dx, offset.dy});
    for (double x = -2; x <= 2; x += 0.02)
      for (double y = -2; y <= 2; y += 0.02) CHECK(got <= total({x, y}) + 1e-9);
  }

  SECTION("never worse than the initial offset") {
    Pcg32 rng(8, 0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<RefinePair> pairs;
      for (int i = 0; i < 20; ++i) {
        RefinePair pair;
        pair.fp = square_footprint(rng.uniform(-5, 5), rng.uniform(-5, 5), 0.7);
        pair.target_xy = {rng.uniform(-6, 6), rng.uniform(-6, 6)};
        pairs.push_back(pair);
      }
      auto total = [&](const Eigen::Vector2d& o) {
        double sum = 0;
        for (const auto& p : pairs) sum += polygon_loss(p.target_xy + o, p.fp);
        return sum;
      };
      const Eigen::Vector2d init(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const PlanarOffset offset = optimize_planar_offset(pairs, init);
      CHECK(total({offset.dx, offset.dy}) <= total(init) + 1e-12);
    }
  }

  SECTION("empty input is an error") {
    CHECK(throws_code([&] { optimize_planar_offset({}); }, ErrorCode::empty_input));
  }
}

TEST_CASE("closest_footprint_point") {
  const VehicleFootprint fp = square_footprint(0, 0, 1.0);
  // Corner quadrant -> corner.
  CHECK((closest_footprint_point({5, 5}, fp) - Eigen::Vector2d(1, 1)).norm() < 1e-12);
  // Broadside -> perpendicular foot on the edge.
  CHECK((closest_footprint_point({5, 0.3}, fp) - Eigen::Vector2d(1, 0.3)).norm() < 1e-12);
}

namespace {

/// Small synthetic second-pass setup: a vehicle driving +x past a sensor
/// at (25, 0), identity calibration. The near member target sits on the
/// contour point the refinement pairs with, displaced toward the sensor
/// by target_offset, so the expected translation correction is exactly
/// +target_offset in y.
struct RefineFixture {
  std::vector<RadarFrame> frames;
  std::vector<ObjectTrack> tracks;
  PoseTrack poses;
  VehicleDims dims{4.0, 2.0, 1.6, {0, 0, 0.8}};
  Calibration calib;

  explicit RefineFixture(double target_offset = 0.0) {
    calib.t = {25, 0, 5};
    ObjectTrack track;
    track.id = 0;
    for (int k = 0; k < 30; ++k) {
      const TimeUs t = 1000000 + k * 66667;
      const double x = 20 + k * 0.3;
      VehiclePose pose;
      pose.t = t;
      pose.p_world = {x, 8, 0.3};
      poses.samples.push_back(pose);

      const VehicleFootprint fp = vehicle_footprint(pose, dims);
      const Eigen::Vector2d foot = closest_footprint_point(calib.t.head<2>(), fp);

      // Two member targets: one on the sensor-facing contour (displaced),
      // one on the far edge; nearest-to-sensor selection picks the first.
      RadarTarget near, far;
      near.t = far.t = t;
      near.p_sensor =
          Eigen::Vector3d(foot.x(), foot.y() - target_offset, 0.5) - calib.t;
      far.p_sensor = Eigen::Vector3d(x, 9.0 - target_offset, 0.5) - calib.t;
      near.v_rad = far.v_rad = 3.0;
      frame_push(t, {near, far});

      TargetCluster cluster;
      cluster.t = t;
      cluster.members = {{static_cast<std::size_t>(k), 0}, {static_cast<std::size_t>(k), 1}};
      cluster.centroid = (near.p_sensor + far.p_sensor) / 2.0;
      track.observations.push_back(cluster);
    }
    poses.nominal_rate_hz = 15.0;
    tracks.push_back(track);
  }

 private:
  void frame_push(TimeUs t, std::vector<RadarTarget> targets) {
    RadarFrame frame;
    frame.t = t;
    frame.targets = std::move(targets);
    frames.push_back(frame);
  }
};

}  // namespace

TEST_CASE("nearest_target_correspondences picks the closest member and contour point") {
  RefineFixture fx;
  const auto samples = nearest_target_correspondences(fx.frames, fx.calib, fx.tracks, fx.poses,
                                                      fx.dims, 50000);
  REQUIRE(samples.size() == fx.tracks[0].observations.size());
  for (const auto& s : samples) {
    // Nearer of the two members: the contour point on the y = 7 edge.
    CHECK(s.p_sensor_raw.y() + fx.calib.t.y() == Catch::Approx(7.0));
    CHECK(s.corner_xy.y() == Catch::Approx(7.0).margin(1e-9));
  }
}

TEST_CASE("refine_calibration corrects a translation offset and keeps the rotation") {
  // Targets systematically displaced 0.8 m toward the sensor relative to
  // the vehicle contour: refinement must push the calibration back.
  RefineFixture fx(0.8);
  NoiseSpec noise;
  noise.sigma_meas = 0.2;
  const Calibration refined = refine_calibration(fx.calib, fx.frames, fx.tracks, fx.poses,
                                                 fx.dims, noise, 50000);
  CHECK((refined.R - fx.calib.R).cwiseAbs().maxCoeff() == 0.0);  // rotation untouched
  CHECK((refined.R_level - fx.calib.R_level).cwiseAbs().maxCoeff() == 0.0);
  CHECK(refined.t.y() == Catch::Approx(0.8).margin(0.15));
  CHECK(refined.t.z() == 5.0);  // vertical component untouched
  CHECK(refined.refined);
}

TEST_CASE("refine_calibration does no harm on aligned data") {
  RefineFixture fx(0.0);
  NoiseSpec noise;
  noise.sigma_meas = 0.2;
  const Calibration refined = refine_calibration(fx.calib, fx.frames, fx.tracks, fx.poses,
                                                 fx.dims, noise, 50000);
  CHECK((refined.R - fx.calib.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::hypot(refined.t.x() - fx.calib.t.x(), refined.t.y() - fx.calib.t.y()) < 0.3);
  CHECK(refined.t.z() == 5.0);
}
