#include "oracles.hpp"
#include "stemnav/geometry.hpp"

#include <doctest.h>

#include <random>

using namespace stemnav;

namespace {

Scene box_scene(const Vec3& lo, const Vec3& hi, bool ground = false) {
  Scene s;
  s.ground = ground;
  s.obstacles.push_back(ConvexObstacle::box(lo, hi));
  return s;
}

Scene random_scene(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> c(-12.0, 12.0), size(0.5, 4.0);
  Scene s;
  s.ground = false;
  for (int i = 0; i < count; ++i) {
    const Vec3 centre(c(rng), c(rng), c(rng) * 0.5 + 5.0);
    const Vec3 half(size(rng), size(rng), size(rng));
    s.obstacles.push_back(ConvexObstacle::box(centre - half, centre + half));
  }
  return s;
}

}  // namespace

TEST_CASE("ray_cast: empty scene has no return") {
  Scene s;
  s.ground = false;
  CHECK_FALSE(is_return(ray_cast({0, 0, 5}, {1, 0, 0}, s, 30.0, 0.01)));
  CHECK_FALSE(is_return(ray_cast({0, 0, 5}, {0, 0.6, 0.8}, s, 30.0, 0.01)));
}

TEST_CASE("ray_cast: box face at 10 m along +X") {
  const Scene s = box_scene({10, -5, -5}, {20, 5, 5});
  const double r = ray_cast({0, 0, 0}, {1, 0, 0}, s, 30.0, 0.01);
  CHECK(r >= 10.0);
  CHECK(r <= 10.01 + 1e-12);
}

TEST_CASE("ray_cast: face beyond the maximum range") {
  const Scene s = box_scene({40, -5, -5}, {50, 5, 5});
  CHECK_FALSE(is_return(ray_cast({0, 0, 0}, {1, 0, 0}, s, 30.0, 0.01)));
}

TEST_CASE("ray_cast: argument errors") {
  const Scene s = box_scene({10, -5, -5}, {20, 5, 5});
  CHECK_THROWS_AS(ray_cast({0, 0, 0}, {2, 0, 0}, s, 30.0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(ray_cast({0, 0, 0}, {1, 0, 0}, s, 30.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ray_cast({0, 0, 0}, {1, 0, 0}, s, -1.0, 0.01), std::invalid_argument);
}

TEST_CASE("ray_cast: bracket and range properties on random rays") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int hits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Scene s = random_scene(rng, 6);
    for (int k = 0; k < 50; ++k) {
      const Vec3 o(u(rng) * 3.0, u(rng) * 3.0, 5.0 + u(rng));
      if (point_in_scene(o, s)) continue;
      Vec3 d(u(rng), u(rng), u(rng));
      if (d.norm() < 0.1) continue;
      d.normalize();
      const double step = 0.05;
      const double r = ray_cast(o, d, s, 30.0, step);
      const double exact = oracle::ray_distance(o, d, s);
      CHECK(r == ray_cast_reference(o, d, s, 30.0, step));
      if (!is_return(r)) {
        // Only a sliver thinner than the step can be skipped.
        continue;
      }
      ++hits;
      CHECK(r <= 30.0);
      CHECK(point_in_scene(o + r * d, s));
      CHECK_FALSE(point_in_scene(o + (r - step) * d, s));
      CHECK(r >= exact - 1e-9);
      CHECK(r <= exact + step + 1e-9);
    }
  }
  CHECK(hits > 100);
}

TEST_CASE("point_in_scene") {
  Scene s = box_scene({0, 0, 0}, {2, 4, 6}, true);
  CHECK_FALSE(point_in_scene({10, 10, 1}, s));
  CHECK(point_in_scene({10, 10, -1}, s));
  CHECK(point_in_scene({1, 2, 3}, s));
  s.ground = false;
  CHECK_FALSE(point_in_scene({10, 10, -1}, s));
}

TEST_CASE("scene_signed_distance") {
  const Scene s = box_scene({0, 0, 0}, {2, 2, 2});
  CHECK(scene_signed_distance({5, 1, 1}, s) == doctest::Approx(3.0));
  CHECK(scene_signed_distance({1, 1, 1.5}, s) == doctest::Approx(-0.5));
  CHECK(scene_signed_distance({5, 6, 1}, s) == doctest::Approx(5.0));
  Scene empty;
  empty.ground = false;
  CHECK(scene_signed_distance({0, 0, 0}, empty) == oracle::kInf);
}

TEST_CASE("ConvexObstacle: malformed inputs are rejected") {
  CHECK_THROWS_AS(ConvexObstacle::from_halfspaces({{Vec3(1, 0, 0), 1.0}}), GeometryError);
  CHECK_THROWS_AS(ConvexObstacle::from_vertices({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}}), GeometryError);
  // x <= 0 and x >= 1
  std::vector<HalfSpace> empty{{Vec3(1, 0, 0), 0.0}, {Vec3(-1, 0, 0), -1.0}, {Vec3(0, 1, 0), 1.0},
                               {Vec3(0, -1, 0), 1.0}, {Vec3(0, 0, 1), 1.0},  {Vec3(0, 0, -1), 1.0}};
  CHECK_THROWS_AS(ConvexObstacle::from_halfspaces(empty), GeometryError);
}

TEST_CASE("ConvexObstacle: vertex and half-space forms agree on random probes") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 12; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    const ConvexObstacle hull = ConvexObstacle::from_vertices(pts);
    const ConvexObstacle back = ConvexObstacle::from_halfspaces(hull.faces());
    const ConvexObstacle again = ConvexObstacle::from_vertices(back.vertices());
    Scene a, b, c;
    a.ground = b.ground = c.ground = false;
    a.obstacles = {hull};
    b.obstacles = {back};
    c.obstacles = {again};
    int inside = 0;
    for (int k = 0; k < 1000; ++k) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const bool in = point_in_scene(p, a);
      inside += in ? 1 : 0;
      CHECK(in == point_in_scene(p, b));
      CHECK(in == point_in_scene(p, c));
    }
    CHECK(inside > 0);
    for (const auto& v : pts) CHECK(hull.face_distance(v) <= 1e-9);
  }
}

TEST_CASE("HalfplaneSet: rows are unit normalized, vacuous and contradictory rows") {
  HalfplaneSet s;
  s.add({3.0, 4.0}, 10.0);
  REQUIRE(s.rows() == 1);
  CHECK(s.normal(0).norm() == doctest::Approx(1.0));
  CHECK(s.rhs(0) == doctest::Approx(2.0));
  s.add({0.0, 0.0}, 1.0);
  CHECK(s.rows() == 1);
  CHECK_FALSE(s.contradictory());
  s.add({0.0, 0.0}, -1.0);
  CHECK(s.contradictory());
}

TEST_CASE("distance_to_polyhedron") {
  HalfplaneSet half;
  half.add({1, 0}, 0.0);
  CHECK(distance_to_polyhedron({-1, 7}, half) == 0.0);
  CHECK(distance_to_polyhedron({3, 4}, half) == doctest::Approx(3.0));

  HalfplaneSet corner;
  corner.add({1, 0}, 0.0);
  corner.add({0, 1}, 0.0);
  CHECK(distance_to_polyhedron({1, 1}, corner) == doctest::Approx(std::sqrt(2.0)));

  HalfplaneSet empty;
  empty.add({1, 0}, -1.0);
  empty.add({-1, 0}, -1.0);
  CHECK_THROWS_AS(distance_to_polyhedron({0, 0}, empty), GeometryError);
}

TEST_CASE("distance_to_polyhedron is zero exactly on the set") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    HalfplaneSet s;
    for (int r = 0; r < 4; ++r) {
      Vec2 n(u(rng), u(rng));
      if (n.norm() < 0.1) continue;
      s.add(n, std::abs(u(rng)) + 0.1);
    }
    for (int k = 0; k < 20; ++k) {
      const Vec2 p(u(rng), u(rng));
      const double d = distance_to_polyhedron(p, s);
      if (s.contains(p, 1e-9))
        CHECK(d <= 1e-9);
      else
        CHECK(d > 0.0);
      CHECK(d >= s.violation(p) - 1e-9);
    }
  }
}
