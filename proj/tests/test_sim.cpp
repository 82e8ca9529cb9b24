#include "stemnav/sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace stemnav;

namespace {

ScenarioSpec scenario(const std::string& file) {
  return load_scenario(std::filesystem::path(STEMNAV_SCENARIO_DIR) / file);
}

ScenarioSpec pair_in_the_open() {
  ScenarioSpec s;
  s.name = "pair";
  s.ground_station.enabled = false;
  s.drones = {{6, 0, 8}, {0, 0, 8}};
  s.poi = {20, 0, 8};
  return s;
}

}  // namespace

TEST_CASE("run: single drone in free space reaches the goal in a straight line") {
  const ScenarioSpec spec = scenario("empty_single.json");
  const RunLog log = run(spec, nullptr);
  REQUIRE(log.summary.outcome == Outcome::success);
  REQUIRE(log.summary.time_to_goal_s);
  const double distance = (spec.poi - spec.drones[0]).norm();
  CHECK(*log.summary.time_to_goal_s <= distance / spec.vehicle.max_speed_m_s + spec.vehicle.settling_time_s);
  CHECK(log.summary.hold_steps == 0);
  CHECK(log.summary.invariants.references_inside_obstacles == 0);
  for (const auto& r : log.records) {
    CHECK(std::abs(r.positions[0].y()) < 1e-9);
    CHECK(std::abs(r.positions[0].z() - 5.0) < 1e-9);
  }
}

TEST_CASE("run: identical inputs give identical logs") {
  ScenarioSpec spec = scenario("empty_single.json");
  spec.lidar.noise_sigma_m = 0.02;
  const std::string a = run(spec, nullptr).to_jsonl();
  CHECK(a == run(spec, nullptr).to_jsonl());
  spec.seed += 1;
  CHECK(a != run(spec, nullptr).to_jsonl());
}

TEST_CASE("run: the log has a header, one line per record and a summary") {
  const RunLog log = run(scenario("empty_single.json"), nullptr);
  const std::string text = log.to_jsonl();
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == log.records.size() + 2);
  CHECK(text.find(kRunLogSchema) != std::string::npos);
}

TEST_CASE("run: start inside an obstacle is a configuration error") {
  ScenarioSpec spec = scenario("empty_single.json");
  ObstacleSpec box;
  box.lo = {-1, -1, 0};
  box.hi = {1, 1, 10};
  spec.obstacles.push_back(box);
  CHECK_THROWS_AS(run(spec, nullptr), ConfigError);
}

TEST_CASE("Physics: energy never increases with frozen references and winches") {
  const ScenarioSpec spec = pair_in_the_open();
  Physics physics(spec);
  const std::vector<Vec3> refs{{7, 1, 9}, {-1, 0.5, 7.5}};
  // the tracking energy is measured against the current reference
  physics.step(refs, spec.physics_step_s, false);
  double e = physics.energy();
  const double scale = std::abs(e) + 1.0;
  for (int k = 0; k < 5000; ++k) {
    physics.step(refs, spec.physics_step_s, false);
    const double next = physics.energy();
    REQUIRE(next <= e + 1e-6 * scale);
    e = next;
  }
  CHECK(physics.lengths() == Physics(spec).lengths());
}

TEST_CASE("Physics: tethers start relaxed and slack by the winch factor") {
  const ScenarioSpec spec = pair_in_the_open();
  const Physics physics(spec);
  REQUIRE(physics.tethers().size() == 1);
  CHECK(physics.lengths()[0] == doctest::Approx(spec.winch.slack_factor * 6.0));
  for (const auto& p : physics.tethers()[0].positions) CHECK(p.z() < 8.0);
}

TEST_CASE("collision_metrics") {
  Scene scene;
  scene.obstacles.push_back(ConvexObstacle::box({0, 0, 0}, {2, 2, 2}));
  TetherParams params;
  TetherState t = TetherState::straight({-3, 1, 1}, {5, 1, 1}, 8.0, params);
  auto m = collision_metrics({{-3, 1, 1}, {5, 1, 1}}, {t}, scene);
  CHECK(m.min_drone_distance_m == doctest::Approx(1.0));
  CHECK(m.min_tether_distance_m < 0.0);
  CHECK(m.collision);

  t = TetherState::straight({-3, 1, 3}, {5, 1, 3}, 8.0, params);
  m = collision_metrics({{-3, 1, 3}, {5, 1, 3}}, {t}, scene);
  CHECK_FALSE(m.collision);
  CHECK(m.min_tether_distance_m == doctest::Approx(1.0));

  m = collision_metrics({{1, 1, 1.999}}, {}, scene);
  CHECK(m.collision);
  CHECK(m.min_drone_distance_m == doctest::Approx(-0.001));
  CHECK(std::isinf(m.min_tether_distance_m));
}

TEST_CASE("needs_table") {
  CHECK_FALSE(needs_table(scenario("empty_single.json")));
  ScenarioSpec s = pair_in_the_open();
  CHECK(needs_table(s));
  s.planner.tether_clearance = false;
  CHECK_FALSE(needs_table(s));
}
