#include <cmath>
#include <numbers>

#include "balltrack/geometry.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace balltrack;

namespace {

Mat34 canonical() {
  Mat34 P = Mat34::Zero();
  P.leftCols<3>().setIdentity();
  return P;
}

std::vector<View> views_of(const Point3& X, const std::vector<CameraModel>& rig) {
  std::vector<View> views;
  for (const CameraModel& cam : rig) views.push_back({project(X, cam), &cam});
  return views;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("canonical camera divides by depth") {
    const CameraModel cam(0, canonical(), 10, 10);
    CHECK(project(Point3(0, 0, 1), cam) == Pixel{0, 0});
    const Pixel p = project(Point3(2, 4, 2), cam);
    CHECK(p.u == doctest::Approx(1.0));
    CHECK(p.v == doctest::Approx(2.0));
  }

  TEST_CASE("projection matches a direct matrix product") {
    const auto rig = synthetic_rig(4, Box{Point3(-1, -1, 0), Point3(1, 1, 1.5)});
    const Point3 X(0.5, -0.3, 1.2);
    for (const CameraModel& cam : rig) {
      const Pixel p = project(X, cam);
      const Pixel q = *oracle::project(cam, X);
      CHECK(std::abs(p.u - q.u) < 1e-9);
      CHECK(std::abs(p.v - q.v) < 1e-9);
    }
  }

  TEST_CASE("projection is invariant to the scale and sign of P") {
    std::mt19937_64 rng(3);
    const auto rig = fixtures::random_rig(5, rng);
    for (const CameraModel& cam : rig) {
      const Point3 X = fixtures::uniform_in(Box{Point3(-0.5, -0.5, -0.5), Point3(0.5, 0.5, 0.5)}, rng);
      const Pixel base = project(X, cam);
      for (double k : {1e-3, 7.0, -2.5}) {
        const CameraModel scaled(cam.id(), k * cam.P(), cam.width(), cam.height());
        const Pixel p = project(X, scaled);
        CHECK(p.u == doctest::Approx(base.u).epsilon(1e-12));
        CHECK(p.v == doctest::Approx(base.v).epsilon(1e-12));
        CHECK((scaled.center() - cam.center()).norm() < 1e-9);
      }
    }
  }

  TEST_CASE("points behind the camera or on its principal plane do not project") {
    const CameraModel cam(0, canonical(), 10, 10);
    CHECK(try_project(Point3(1, 1, -2), cam).status == ProjectStatus::kBehindCamera);
    CHECK(try_project(Point3(1, 1, 0), cam).status == ProjectStatus::kDepthDegenerate);
    CHECK_THROWS_AS(project(Point3(1, 1, -2), cam), ProjectionError);
    const CameraModel flipped(1, -canonical(), 10, 10);
    CHECK(try_project(Point3(1, 1, 2), flipped).status == ProjectStatus::kOk);
    CHECK(try_project(Point3(1, 1, 2), flipped).depth == doctest::Approx(2.0));
  }

  TEST_CASE("camera construction rejects singular or non-finite matrices") {
    Mat34 P = canonical();
    P(2, 2) = 0.0;
    CHECK_THROWS_AS(CameraModel(0, P, 10, 10), std::invalid_argument);
    P = canonical();
    P(0, 3) = std::nan("");
    CHECK_THROWS_AS(CameraModel(0, P, 10, 10), std::invalid_argument);
    CHECK_THROWS_AS(CameraModel(0, canonical(), 0, 10), std::invalid_argument);
  }

  TEST_CASE("noiseless round trip recovers the point") {
    std::mt19937_64 rng(11);
    const Box box{Point3(-0.5, -0.5, -0.5), Point3(0.5, 0.5, 0.5)};
    for (int trial = 0; trial < 200; ++trial) {
      const auto rig = fixtures::random_rig(2 + trial % 7, rng);
      const Point3 X = fixtures::uniform_in(box, rng);
      const auto views = views_of(X, rig);
      CHECK((triangulate(views, false) - X).norm() < 1e-6);
      CHECK((triangulate(views, true) - X).norm() < 1e-6);
    }
  }

  TEST_CASE("linear stage agrees with the homogeneous null-vector solution when noiseless") {
    std::mt19937_64 rng(5);
    const auto rig = fixtures::random_rig(6, rng);
    const Point3 X(0.1, -0.2, 0.3);
    const auto views = views_of(X, rig);
    CHECK((triangulate(views, false) - oracle::svd_point(views)).norm() < 1e-8);
  }

  TEST_CASE("coincident centers or a single view are degenerate") {
    const auto rig = synthetic_rig(2, Box{Point3(-1, -1, 0), Point3(1, 1, 1)});
    const CameraModel twin(9, 2.0 * rig[0].P(), 640, 480);
    const Point3 X(0.1, 0.2, 0.3);
    const std::vector<View> same{{project(X, rig[0]), &rig[0]}, {project(X, twin), &twin}};
    CHECK_THROWS_AS(triangulate(same, true), DegenerateGeometry);
    const std::vector<View> one{{project(X, rig[0]), &rig[0]}};
    CHECK_THROWS_AS(triangulate(one, true), std::invalid_argument);
  }

  TEST_CASE("refinement never increases the reprojection cost") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 2.0);
    const Box box{Point3(-0.3, -0.3, -0.3), Point3(0.3, 0.3, 0.3)};
    for (int trial = 0; trial < 200; ++trial) {
      const auto rig = fixtures::random_rig(3 + trial % 5, rng);
      auto views = views_of(fixtures::uniform_in(box, rng), rig);
      for (View& v : views) {
        v.pixel.u += noise(rng);
        v.pixel.v += noise(rng);
      }
      const double linear = squared_reprojection_cost(triangulate(views, false), views);
      const double refined = squared_reprojection_cost(triangulate(views, true), views);
      CHECK(refined <= linear * (1 + 1e-12));
    }
  }

  TEST_CASE("reprojection distance of a 3-4 pixel shift is 5") {
    const auto rig = synthetic_rig(3, Box{Point3(-1, -1, 0), Point3(1, 1, 1)});
    const Point3 X(0.2, -0.1, 0.5);
    auto views = views_of(X, rig);
    views[1].pixel.u += 3.0;
    views[1].pixel.v += 4.0;
    const auto d = reprojection_errors(X, views);
    CHECK(d[0] < 1e-9);
    CHECK(d[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(d[2] < 1e-9);
  }

  TEST_CASE("reprojection errors match a per-camera recomputation") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> px(0.0, 640.0);
    const auto rig = fixtures::random_rig(7, rng);
    for (int trial = 0; trial < 100; ++trial) {
      const Point3 X = fixtures::uniform_in(Box{Point3(-1, -1, -1), Point3(1, 1, 1)}, rng);
      std::vector<View> views;
      for (const CameraModel& cam : rig) views.push_back({{px(rng), px(rng)}, &cam});
      const auto d = reprojection_errors(X, views);
      for (std::size_t i = 0; i < views.size(); ++i) {
        const Pixel q = *oracle::project(rig[i], X);
        const double expect = std::hypot(q.u - views[i].pixel.u, q.v - views[i].pixel.v);
        CHECK(d[i] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("reprojection error is infinite behind the camera") {
    const CameraModel cam(0, canonical(), 10, 10);
    const View view{{0, 0}, &cam};
    CHECK(std::isinf(reprojection_error(Point3(0, 0, -1), view)));
  }

  TEST_CASE("rig keeps every workspace corner in frame") {
    const Box box{Point3(-1.5, -1, 0), Point3(1.5, 1, 1.5)};
    const auto rig = synthetic_rig(4, box);
    REQUIRE(rig.size() == 4);
    for (const CameraModel& cam : rig) {
      for (const Point3& corner : box.corners()) {
        const Pixel p = project(corner, cam);
        CHECK(p.u >= 0.0);
        CHECK(p.u < cam.width());
        CHECK(p.v >= 0.0);
        CHECK(p.v < cam.height());
      }
    }
  }

  TEST_CASE("two-camera rig looks at the workspace center from distinct places") {
    const Box box{Point3(-1.5, -1, 0), Point3(1.5, 1, 1.5)};
    const auto rig = synthetic_rig(2, box);
    CHECK((rig[0].center() - rig[1].center()).norm() > 1.0);
    for (const CameraModel& cam : rig) {
      const Vec3 to_center = (box.center() - cam.center()).normalized();
      const double angle = std::acos(std::clamp(to_center.dot(cam.principal_axis()), -1.0, 1.0));
      CHECK(angle < 1e-6);
    }
    CHECK_THROWS_AS(synthetic_rig(1, box), std::invalid_argument);
  }
}
