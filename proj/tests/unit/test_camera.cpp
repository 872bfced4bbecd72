#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/error.hpp"

using namespace meshvote;

TEST_CASE("trajectory positions follow spherical coordinates around +y") {
  TrajectoryConfig config;
  config.view_count = 12;
  config.polar_angles_deg = {60, 90, 120};
  config.radius = 3.5;
  const auto views = generate_trajectory(config);
  REQUIRE(views.size() == 12);
  for (int i = 0; i < 12; ++i) {
    const double theta = config.polar_angles_deg[i / 4] * std::numbers::pi / 180;
    const double phi = (i % 4) * std::numbers::pi / 2;
    const Vec3 expected(3.5 * std::sin(theta) * std::cos(phi), 3.5 * std::cos(theta),
                        3.5 * std::sin(theta) * std::sin(phi));
    CHECK((views[i].position - expected).norm() < 1e-12);
    CHECK(views[i].index == i);
    CHECK((views[i].forward() + views[i].position.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("other polar axes rotate the same pattern") {
  TrajectoryConfig config;
  config.up_axis = UpAxis::Z;
  for (const Viewpoint& v : generate_trajectory(config)) {
    const double theta = v.theta_deg * std::numbers::pi / 180;
    CHECK(v.position.z() == doctest::Approx(2 * std::cos(theta)));
    CHECK(std::hypot(v.position.x(), v.position.y()) == doctest::Approx(2 * std::sin(theta)));
  }
  config.up_axis = UpAxis::X;
  for (const Viewpoint& v : generate_trajectory(config)) {
    CHECK(v.position.x() == doctest::Approx(2 * std::cos(v.theta_deg * std::numbers::pi / 180)));
  }
}

TEST_CASE("projection agrees with an independent pinhole model") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  TrajectoryConfig config;
  config.image_size = 97;
  for (const Viewpoint& vp : generate_trajectory(config)) {
    const auto cam = oracle::PinholeCamera::orbit(vp.radius, vp.theta_deg, vp.phi_deg,
                                                  config.fov_y_deg, 97);
    for (int i = 0; i < 50; ++i) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const Projection proj = project(vp, p);
      REQUIRE_FALSE(proj.behind_camera);
      CHECK((proj.pixel - cam.to_pixel(p)).norm() < 1e-9);
      CHECK(proj.depth == doctest::Approx((p - cam.eye).dot(cam.forward)));
      CHECK((unproject(vp, proj.pixel, proj.depth) - p).norm() < 1e-9);
    }
  }
}

TEST_CASE("origin projects to the image centre; points behind are flagged") {
  const Viewpoint vp = make_viewpoint(0, 2, 75, 0, 64, 60);
  const Projection c = project(vp, Vec3::Zero());
  CHECK(c.pixel.x() == doctest::Approx(32));
  CHECK(c.pixel.y() == doctest::Approx(32));
  CHECK(c.depth == doctest::Approx(2));
  CHECK(project(vp, vp.position * 1.5).behind_camera);
  // Up in the world is up in the image (smaller y).
  CHECK(project(vp, Vec3(0, 0.5, 0)).pixel.y() < 32);
}

TEST_CASE("cameras on the polar axis fall back to another up vector") {
  const Viewpoint vp = make_viewpoint(0, 2, 1e-9, 0, 32, 45);
  const Projection p = project(vp, Vec3(0.1, 0, 0.1));
  CHECK(std::isfinite(p.pixel.x()));
  CHECK(std::isfinite(p.pixel.y()));
}

TEST_CASE("invalid trajectories are rejected") {
  auto bad = [](auto edit) {
    TrajectoryConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrajectoryConfig& c) { c.view_count = 7; });
  bad([](TrajectoryConfig& c) { c.view_count = 0; });
  bad([](TrajectoryConfig& c) { c.polar_angles_deg = {60, 90, 120}; });
  bad([](TrajectoryConfig& c) { c.radius = 0; });
  bad([](TrajectoryConfig& c) { c.polar_angles_deg = {0, 90}; });
  bad([](TrajectoryConfig& c) { c.polar_angles_deg = {90, 180}; });
  bad([](TrajectoryConfig& c) { c.fov_y_deg = 10; });
  bad([](TrajectoryConfig& c) { c.fov_y_deg = 120; });
  bad([](TrajectoryConfig& c) { c.image_size = 0; });
  TrajectoryConfig ok;
  ok.view_count = 2;
  ok.polar_angles_deg = {90};
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS(generate_trajectory(TrajectoryConfig{.view_count = 5}), ConfigError);
}
