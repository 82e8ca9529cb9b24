#include "oracles.hpp"
#include "stemnav/planner.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace stemnav;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNone = kNoReturn;

ScanVector scan_of(const ScanPlane& plane, std::vector<double> ranges) {
  ScanVector s;
  s.plane = plane;
  s.angular_resolution_rad = 2.0 * kPi / static_cast<double>(ranges.size());
  s.ranges = std::move(ranges);
  return s;
}

FreeSector sector(int lo, int hi, int m) {
  FreeSector s;
  s.lo = lo;
  s.hi = hi;
  s.beam_count = m;
  s.resolution_rad = 2.0 * kPi / m;
  return s;
}

// Eight beams, 45 degrees apart; listed beams have no return, the rest return
// at @p range.
std::vector<double> eight(std::initializer_list<int> free_beams, double range) {
  std::vector<double> r(8, range);
  for (int j : free_beams) r[static_cast<std::size_t>(j)] = kNone;
  return r;
}

ScanPair pair_of(const Vec3& p, double yaw, std::vector<double> horizontal, std::vector<double> vertical) {
  ScanPair s;
  s.horizontal = scan_of(ScanPlane::horizontal(p), std::move(horizontal));
  s.vertical = scan_of(ScanPlane::vertical(p, yaw), std::move(vertical));
  s.vertical_yaw = yaw;
  return s;
}

FormationState formation(std::vector<Vec3> positions, std::vector<ScanPair> scans) {
  FormationState f;
  f.velocities.assign(positions.size(), Vec3::Zero());
  f.tether_lengths.assign(positions.size() > 1 ? positions.size() - 1 : 0, 10.0);
  f.positions = std::move(positions);
  f.scans = std::move(scans);
  return f;
}

CatenaryTable constant_sag_table(double sag) {
  const CatenaryGrid g;
  return CatenaryTable(TetherParams{}, g, RelaxOptions{}, std::vector<double>(g.cell_count(), sag),
                       std::vector<std::uint8_t>(g.cell_count(), 1));
}

bool has_active(const PlannerOutput& out, int drone, RowSource source) {
  for (const auto& a : out.active_rows)
    if (a.drone == drone && a.source == source) return true;
  return false;
}

}  // namespace

TEST_CASE("compute_goals") {
  auto g = compute_goals({{0, 0, 5}, {-2, 0, 5}}, {10, 0, 5}, 5.0);
  CHECK((g[0] - Vec3(10, 0, 5)).norm() < 1e-12);
  CHECK((g[1] - Vec3(5, 0, 5)).norm() < 1e-12);

  g = compute_goals({{0, 0, 5}, {-3, 0, 5}, {-6, 0, 5}}, {10, 0, 5}, 5.0);
  CHECK((g[1] - Vec3(5, 0, 5)).norm() < 1e-12);
  CHECK((g[2] - Vec3(0, 0, 5)).norm() < 1e-12);

  // leader on the point of interest: the follower aims at the leader
  g = compute_goals({{1, 2, 3}, {0, 0, 3}}, {1, 2, 3}, 5.0);
  CHECK((g[1] - Vec3(1, 2, 3)).norm() < 1e-12);

  // follower on its goal: the previous direction is reused
  g = compute_goals({{0, 0, 5}, {5, 0, 5}, {-9, 0, 5}}, {10, 0, 5}, 5.0);
  CHECK((g[2] - Vec3(0, 0, 5)).norm() < 1e-12);
  CHECK_THROWS_AS(compute_goals({}, {0, 0, 0}, 5.0), std::invalid_argument);
}

TEST_CASE("extract_free_sectors: runs, wraparound and thresholds") {
  const ScanPlane h = ScanPlane::horizontal({0, 0, 5});
  auto s = extract_free_sectors(scan_of(h, {3, 3, 3, 3, kNone, kNone, kNone, kNone}), 30.0);
  REQUIRE(s.size() == 1);
  CHECK(s[0].lo == 4);
  CHECK(s[0].hi == 7);
  CHECK_FALSE(s[0].unconstrained);

  s = extract_free_sectors(scan_of(h, {kNone, kNone, 3, 3, 3, 3, 3, kNone}), 30.0);
  REQUIRE(s.size() == 1);
  CHECK(s[0].lo == 7);
  CHECK(s[0].hi == 1);
  CHECK(s[0].wraps());
  CHECK(s[0].width() == doctest::Approx(kPi / 2));

  s = extract_free_sectors(scan_of(h, eight({0, 1, 2, 3, 4, 5, 6, 7}, 0)), 30.0);
  REQUIRE(s.size() == 1);
  CHECK(s[0].unconstrained);
  CHECK(s[0].width() == doctest::Approx(2 * kPi));

  CHECK(extract_free_sectors(scan_of(h, eight({}, 3.0)), 30.0).empty());

  // returns beyond the free range count as free
  s = extract_free_sectors(scan_of(h, {3, 20, 20, 3, 3, kNone, 3, 3}), 15.0);
  REQUIRE(s.size() == 2);
  CHECK(s[0].lo == 1);
  CHECK(s[0].hi == 2);
  CHECK(s[1].lo == 5);
  CHECK(s[1].hi == 5);
}

TEST_CASE("extract_free_sectors: sectors are maximal runs of free beams") {
  std::mt19937_64 rng(31);
  std::bernoulli_distribution coin(0.6);
  const ScanPlane h = ScanPlane::horizontal({0, 0, 5});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> r(24);
    for (auto& x : r) x = coin(rng) ? kNone : 2.0;
    const auto sectors = extract_free_sectors(scan_of(h, r), 30.0);
    std::vector<int> owner(24, -1);
    for (std::size_t k = 0; k < sectors.size(); ++k) {
      const auto& s = sectors[k];
      if (s.unconstrained) continue;
      for (int j = s.lo;; j = (j + 1) % 24) {
        CHECK_FALSE(is_return(r[static_cast<std::size_t>(j)]));
        CHECK(owner[static_cast<std::size_t>(j)] == -1);
        owner[static_cast<std::size_t>(j)] = static_cast<int>(k);
        if (j == s.hi) break;
      }
      CHECK(is_return(r[static_cast<std::size_t>((s.lo + 23) % 24)]));
      CHECK(is_return(r[static_cast<std::size_t>((s.hi + 1) % 24)]));
    }
    for (int j = 0; j < 24; ++j)
      if (!is_return(r[static_cast<std::size_t>(j)]) && !(sectors.size() == 1 && sectors[0].unconstrained))
        CHECK(owner[static_cast<std::size_t>(j)] >= 0);
  }
}

TEST_CASE("sector_to_halfplanes: 45 to 135 degrees") {
  const auto rows = sector_to_halfplanes(sector(1, 3, 8), {0, 0});
  REQUIRE(rows.rows() == 2);
  const double s = 1.0 / std::sqrt(2.0);
  // {x - y <= 0, -x - y <= 0}, normalized
  bool first = false, second = false;
  for (std::size_t i = 0; i < 2; ++i) {
    first = first || ((rows.normal(i) - Vec2(s, -s)).norm() < 1e-12 && std::abs(rows.rhs(i)) < 1e-12);
    second = second || ((rows.normal(i) - Vec2(-s, -s)).norm() < 1e-12 && std::abs(rows.rhs(i)) < 1e-12);
  }
  CHECK(first);
  CHECK(second);
  CHECK(rows.contains({0, 1}));
  CHECK_FALSE(rows.contains({0, -1}));
}

TEST_CASE("sector_to_halfplanes: vertical boundary through the drone") {
  // boundaries at 0 and 90 degrees from (2, 3)
  const auto rows = sector_to_halfplanes(sector(0, 2, 8), {2, 3});
  REQUIRE(rows.rows() == 2);
  bool vertical = false;
  for (std::size_t i = 0; i < 2; ++i)
    vertical = vertical || ((rows.normal(i) - Vec2(-1, 0)).norm() < 1e-12 && std::abs(rows.rhs(i) + 2.0) < 1e-12);
  CHECK(vertical);
  CHECK(rows.contains({3, 4}));
}

TEST_CASE("sector_to_halfplanes: degenerate and unconstrained sectors") {
  auto full = sector(0, 7, 8);
  full.unconstrained = true;
  CHECK(sector_to_halfplanes(full, {1, 1}).rows() == 0);
  const auto ray = sector_to_halfplanes(sector(2, 2, 8), {1, 1});
  CHECK(ray.rows() == 3);
  CHECK(ray.contains({1, 5}));
  CHECK_FALSE(ray.contains({1.1, 5}));
  CHECK_FALSE(ray.contains({1, 0.5}));
  // width exactly pi: a slab through the drone
  const auto half = sector_to_halfplanes(sector(0, 4, 8), {0, 0});
  CHECK(half.contains({0, 3}));
  CHECK_FALSE(half.contains({0, -3}));
}

TEST_CASE("sector_to_halfplanes: points in the constraint lie inside the angular range") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> lo(0, 35), width(0, 18);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = sector(lo(rng), 0, 36);
    FreeSector sec = s;
    sec.hi = (sec.lo + width(rng)) % 36;
    const Vec2 drone(u(rng), u(rng));
    const auto rows = sector_to_halfplanes(sec, drone);
    for (int k = 0; k < 50; ++k) {
      const Vec2 p(u(rng), u(rng));
      if (!rows.contains(p, 1e-9) || (p - drone).norm() < 1e-6) continue;
      double a = std::atan2(p.y() - drone.y(), p.x() - drone.x()) - sec.lo_angle();
      a = std::fmod(a + 4 * kPi, 2 * kPi);
      if (a > 2 * kPi - 1e-9) a = 0.0;
      CHECK(a <= sec.width() + 1e-9);
    }
  }
}

TEST_CASE("select_sector and sector_score") {
  // A borders 0 and 90 degrees, B borders 135 and 225 degrees
  const std::vector<FreeSector> s{sector(3, 5, 8), sector(0, 2, 8)};
  CHECK(sector_score(s[1], {0, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(sector_score(s[0], {0, 0}, {1, 0}) == doctest::Approx(std::sqrt(0.5)));
  CHECK(select_sector(s, {0, 0}, {1, 0}) == 1);
  CHECK(select_sector({s[0]}, {0, 0}, {1, 0}) == 0);
  // mirror images about the goal direction tie; the lower start wins
  const std::vector<FreeSector> mirror{sector(5, 6, 8), sector(2, 3, 8)};
  CHECK(sector_score(mirror[0], {0, 0}, {0, -1}) == doctest::Approx(sector_score(mirror[1], {0, 0}, {0, -1})));
  CHECK(select_sector(mirror, {0, 0}, {0, -1}) == 1);
  CHECK_THROWS_AS(select_sector({}, {0, 0}, {1, 0}), std::invalid_argument);
  const auto rank = rank_sectors(s, {0, 0}, {1, 0});
  CHECK(rank == std::vector<std::size_t>{1, 0});
}

TEST_CASE("deconvexify") {
  // 45 .. 315 degrees, bisector along -X
  const auto wide = sector(1, 7, 8);
  const auto rows = deconvexify(wide, {0, 0}, {-5, 0});
  REQUIRE(rows.rows() == 1);
  for (double t : {0.5, 3.0, 20.0}) CHECK(rows.contains({-t, 0}));

  // 0 .. 270 degrees; goal perpendicular to the 0 degree boundary
  const auto keep = deconvexify(sector(0, 6, 8), {0, 0}, {0, 3});
  REQUIRE(keep.rows() == 1);
  CHECK(std::abs(keep.normal(0).y()) < 1e-12);
  CHECK(keep.contains({-1, 0}));

  auto full = sector(0, 7, 8);
  full.unconstrained = true;
  CHECK(deconvexify(full, {0, 0}, {1, 0}).rows() == 0);
  CHECK(sector_constraint(wide, {0, 0}, {-5, 0}).rows() == 1);
  CHECK(sector_constraint(sector(1, 3, 8), {0, 0}, {0, 5}).rows() == 2);
}

TEST_CASE("unmask_goal") {
  std::vector<double> r(360, kNone);
  for (int j = -30; j <= 30; ++j) r[static_cast<std::size_t>((j + 360) % 360)] = 8.0 / std::cos(j * kPi / 180.0);
  const auto scan = scan_of(ScanPlane::horizontal({0, 0, 5}), r);
  const auto out = unmask_goal(scan, {0, 0}, {5, 0}, 10.0 * kPi / 180.0, 1.0);
  CHECK(out.changed);
  CHECK(out.goal_distance == doctest::Approx(5.0));
  for (int j = -5; j <= 5; ++j) CHECK_FALSE(is_return(out.scan.ranges[static_cast<std::size_t>((j + 360) % 360)]));
  CHECK(is_return(out.scan.ranges[10]));
  CHECK(is_return(out.scan.ranges[350]));

  // goal beyond the wall
  CHECK_FALSE(unmask_goal(scan, {0, 0}, {12, 0}, 10.0 * kPi / 180.0, 1.0).changed);
  // nothing near the goal bearing
  CHECK_FALSE(unmask_goal(scan, {0, 0}, {0, 5}, 10.0 * kPi / 180.0, 1.0).changed);
}

TEST_CASE("embed_rows: a constraint means the same thing in both charts") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const ScanPlane from = ScanPlane::horizontal({u(rng), u(rng), 5 + u(rng)});
    const ScanPlane to = ScanPlane::vertical({u(rng), u(rng), 5 + u(rng)}, u(rng));
    HalfplaneSet rows;
    rows.add({u(rng), u(rng)}, u(rng));
    rows.add({u(rng), u(rng)}, u(rng));
    const auto moved = embed_rows(rows, from, to);
    for (int k = 0; k < 20; ++k) {
      const Vec2 w(u(rng), 5 + u(rng));
      const Vec2 q = from.to_plane(to.from_plane(w));
      if (std::abs(rows.violation(q)) < 1e-6) continue;
      CHECK(rows.contains(q) == moved.contains(w));
    }
  }
}

TEST_CASE("choose_plane") {
  HalfplaneSet h, v;
  h.add({1, 0}, 0.0);
  v.add({1, 0}, 0.0);
  auto c = choose_plane(h, {3, 0}, v, {1, 0});
  CHECK(c.horizontal == doctest::Approx(3.0));
  CHECK(c.vertical == doctest::Approx(1.0));
  CHECK(c.choice == PlaneKind::vertical);
  // equal costs favour the horizontal plane
  CHECK(choose_plane(h, {-1, 0}, v, {-2, 0}).choice == PlaneKind::horizontal);
  // horizontal set empty, goal above inside the vertical gap
  HalfplaneSet none;
  none.add({1, 0}, -1.0);
  none.add({-1, 0}, -1.0);
  c = choose_plane(none, {0, 0}, v, {0, 9});
  CHECK(c.horizontal == oracle::kInf);
  CHECK(c.vertical == 0.0);
  CHECK(c.choice == PlaneKind::vertical);
}

TEST_CASE("tether_clearance_rows: floors from the highest return under the chord") {
  const CatenaryTable table = constant_sag_table(3.0);
  const Vec3 first(0, 0, 15), second(10, 0, 15);
  // second drone looks back toward the first (yaw pi); beam 7 points 45 degrees down
  std::vector<double> r = eight({}, kNone);
  r[7] = 5.0 * std::sqrt(2.0);
  const auto scan = scan_of(ScanPlane::vertical(second, kPi), r);
  const auto c = tether_clearance_rows(first, second, 12.0, scan, table, 2.0);
  REQUIRE(c.active);
  CHECK(c.obstacle_top_m == doctest::Approx(10.0));
  CHECK(c.lowest_point_m == doctest::Approx(12.0));
  CHECK(c.min_z_first_m == doctest::Approx(15.0));
  CHECK(c.min_z_second_m == doctest::Approx(15.0));

  const auto none = tether_clearance_rows(first, second, 12.0, scan_of(scan.plane, eight({}, kNone)), table, 2.0);
  CHECK_FALSE(none.active);
  // a return above the chord does not count
  std::vector<double> high = eight({}, kNone);
  high[1] = 2.0;
  CHECK_FALSE(tether_clearance_rows(first, second, 12.0, scan_of(scan.plane, high), table, 2.0).active);
}

TEST_CASE("tether_clearance_rows: swapping the ends swaps the floors") {
  const CatenaryTable table = constant_sag_table(3.0);
  const Vec3 a(0, 0, 15), b(10, 0, 14);
  // both 45 degree downward beams meet the obstacle at x = 5.5, z = 9.5
  std::vector<double> rb = eight({}, kNone), ra = eight({}, kNone);
  rb[7] = 4.5 * std::sqrt(2.0);
  ra[7] = 5.5 * std::sqrt(2.0);
  const auto ab = tether_clearance_rows(a, b, 12.0, scan_of(ScanPlane::vertical(b, kPi), rb), table, 2.0);
  const auto ba = tether_clearance_rows(b, a, 12.0, scan_of(ScanPlane::vertical(a, 0.0), ra), table, 2.0);
  REQUIRE(ab.active);
  REQUIRE(ba.active);
  CHECK(ab.obstacle_top_m == doctest::Approx(9.5));
  CHECK(ab.min_z_first_m == doctest::Approx(15.5));
  CHECK(ab.min_z_second_m == doctest::Approx(14.5));
  CHECK(ba.min_z_first_m == doctest::Approx(ab.min_z_second_m));
  CHECK(ba.min_z_second_m == doctest::Approx(ab.min_z_first_m));
}

TEST_CASE("plan_step: single drone in free space heads straight for the goal") {
  const Vec3 p(0, 0, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  PlannerConfig cfg;
  auto out = plan_step(formation({p}, {pair_of(p, 0.0, free8, free8)}), {10, 3, 5}, cfg, {});
  REQUIRE(out.feasible);
  CHECK(out.fallbacks.empty());
  const Vec3 ref = out.drones[0].reference;
  CHECK(std::abs(ref.z() - 5.0) < 1e-9);
  CHECK(std::abs(ref.x() - 2.0) < 1e-9);  // reference box edge
  // a goal inside the box is taken as is
  out = plan_step(formation({p}, {pair_of(p, 0.0, free8, free8)}), {1.5, -0.5, 5}, cfg, {});
  CHECK((out.drones[0].reference - Vec3(1.5, -0.5, 5)).norm() < 1e-9);
}

TEST_CASE("plan_step: a follower's sector limits the leader") {
  const Vec3 leader(1, 0, 5), follower(0, 0, 5);
  const Vec3 poi(-1, 4, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  const double yaw = std::atan2(4.0, -2.0);
  const auto f = formation({leader, follower}, {pair_of(leader, yaw, free8, free8),
                                                pair_of(follower, 0.0, eight({7, 0, 1}, 1.0), free8)});
  const auto out = plan_step(f, poi, PlannerConfig{}, {});
  REQUIRE(out.feasible);
  CHECK(out.drones[0].plane == PlaneKind::horizontal);
  CHECK(out.drones[1].plane == PlaneKind::horizontal);
  CHECK(has_active(out, 0, RowSource::follower));
  // projection of the goal onto the follower's 90 degree cone
  CHECK((out.drones[0].reference - Vec3(1.5, 1.5, 5)).norm() < 1e-9);
  // both ends of the reference segment inside the follower's sector
  const auto& fp = out.drones[1];
  CHECK(fp.own_rows.contains(fp.frame.to_plane(out.drones[0].reference), 1e-9));
  CHECK(fp.own_rows.contains(fp.frame.to_plane(fp.reference), 1e-9));
}

TEST_CASE("plan_step: horizontal plane blocked, goal straight above") {
  const Vec3 p(0, 0, 5);
  const auto out = plan_step(formation({p}, {pair_of(p, 0.0, eight({}, 1.0), eight({1, 2, 3}, 1.0))}),
                             {0, 0, 9}, PlannerConfig{}, {});
  REQUIRE(out.feasible);
  CHECK(out.drones[0].plane == PlaneKind::vertical);
  CHECK(out.drones[0].costs.vertical == 0.0);
  CHECK((out.drones[0].reference - Vec3(0, 0, 7)).norm() < 1e-9);
}

TEST_CASE("plan_step fallback: halving the free range") {
  // returns at 20 m block the follower except toward -X; its goal lies beyond
  // them, so no unmasking
  const Vec3 leader(3, 0, 5), follower(0, 0, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  const auto f = formation({leader, follower}, {pair_of(leader, 0.0, free8, free8),
                                                pair_of(follower, 0.0, eight({4}, 20.0), eight({}, 20.0))});
  const auto out = plan_step(f, {28, 0, 5}, PlannerConfig{}, {});
  REQUIRE(out.feasible);
  CHECK(out.fallbacks == std::vector<std::string>{"free_range"});
  CHECK((out.drones[0].reference - Vec3(5, 0, 5)).norm() < 1e-9);
}

TEST_CASE("plan_step fallback: next-best follower sector") {
  const Vec3 leader(3, 0, 5), follower(0, 0, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  const auto f = formation({leader, follower}, {pair_of(leader, 0.0, free8, free8),
                                                pair_of(follower, 0.0, eight({1, 4}, 1.0), eight({}, 1.0))});
  const auto out = plan_step(f, {13, 0, 5}, PlannerConfig{}, {});
  REQUIRE(out.feasible);
  CHECK(out.fallbacks == std::vector<std::string>{"sector:2:horizontal:1-1"});
  const Vec3 ref = out.drones[0].reference;
  CHECK(std::abs(ref.x() - ref.y()) < 1e-9);
}

TEST_CASE("plan_step fallback: holding position when nothing works") {
  const Vec3 leader(3, 0, 5), follower(0, 0, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  const auto f = formation({leader, follower}, {pair_of(leader, 0.0, free8, free8),
                                                pair_of(follower, 0.0, eight({4}, 1.0), eight({}, 1.0))});
  const auto out = plan_step(f, {13, 0, 5}, PlannerConfig{}, {});
  CHECK_FALSE(out.feasible);
  CHECK(out.fallbacks == std::vector<std::string>{"hold"});
  CHECK(out.drones[0].reference == leader);
  CHECK(out.drones[1].reference == follower);
}

TEST_CASE("plan_step: confinement keeps the last drone near the ground station") {
  const Vec3 p(0, 0, 5);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  PlannerContext ctx;
  ctx.ground_station = Vec3(-2, 0, 0);
  PlannerConfig cfg;
  cfg.confinement_radius_m = 1.0;
  const auto out = plan_step(formation({p}, {pair_of(p, 0.0, free8, free8)}), {10, 0, 5}, cfg, ctx);
  REQUIRE(out.feasible);
  CHECK(out.drones[0].reference.x() == doctest::Approx(-1.0));
  CHECK(has_active(out, 0, RowSource::confinement));
}

TEST_CASE("plan_step: tether clearance floors lift both drones") {
  const CatenaryTable table = constant_sag_table(3.0);
  const Vec3 leader(10, 0, 15), follower(0, 0, 15);
  const auto free8 = eight({0, 1, 2, 3, 4, 5, 6, 7}, 0);
  // follower's vertical scan looks at the leader; beam 7 hits a wall top at u = 5, Z = 10
  std::vector<double> v = free8;
  v[7] = 5.0 * std::sqrt(2.0);
  auto f = formation({leader, follower}, {pair_of(leader, 0.0, free8, free8), pair_of(follower, 0.0, free8, v)});
  f.tether_lengths = {12.0};
  PlannerContext ctx;
  ctx.table = &table;
  PlannerConfig cfg;
  cfg.clearance_margin_m = 2.0;
  const auto out = plan_step(f, {20, 0, 15}, cfg, ctx);
  REQUIRE(out.feasible);
  REQUIRE(out.tether_rows.size() == 1);
  const auto& t = out.tether_rows[0];
  CHECK(t.clearance.active);
  CHECK(t.clearance.obstacle_top_m == doctest::Approx(10.0));
  CHECK(t.predicted_lowest_m >= 12.0 - 1e-6);
  CHECK(out.drones[0].reference.z() >= 15.0 - 1e-9);
  CHECK(out.drones[1].reference.z() >= 15.0 - 1e-9);
}

TEST_CASE("plan_step: stateless and invariant to a common weight scale") {
  Scene scene;
  scene.obstacles.push_back(ConvexObstacle::box({4, -1, 0}, {6, 8, 10}));
  const std::vector<Vec3> pos{{3, -3, 5}, {0, -4, 5}};
  LidarConfig lidar;
  std::vector<ScanPair> scans;
  std::vector<double> yaws{0, 0};
  for (std::size_t i = 0; i < pos.size(); ++i) {
    yaws[i] = vertical_plane_yaw(i, pos, {9, 4, 5}, 0.0);
    scans.push_back(scan_pair(pos[i], yaws[i], lidar, scene, i));
  }
  const auto f = formation(pos, scans);
  PlannerConfig cfg;
  const auto a = plan_step(f, {9, 4, 5}, cfg, {});
  const auto b = plan_step(f, {9, 4, 5}, cfg, {});
  REQUIRE(a.feasible);
  for (std::size_t i = 0; i < 2; ++i) CHECK(a.drones[i].reference == b.drones[i].reference);
  cfg.weights = {0.9 * 3.7, 0.5 * 3.7};
  const auto c = plan_step(f, {9, 4, 5}, cfg, {});
  for (std::size_t i = 0; i < 2; ++i) CHECK((a.drones[i].reference - c.drones[i].reference).norm() < 1e-9);
}

TEST_CASE("PlannerConfig validation") {
  PlannerConfig c;
  CHECK_NOTHROW(c.validate(2, 30.0));
  c.free_range_m = 40.0;
  CHECK_THROWS_AS(c.validate(2, 30.0), std::invalid_argument);
  c = PlannerConfig{};
  c.weights = {1.0};
  CHECK_THROWS_AS(c.validate(2, 30.0), std::invalid_argument);
  c.weights = {1.0, 0.0};
  CHECK_THROWS_AS(c.validate(2, 30.0), std::invalid_argument);
  CHECK(PlannerConfig{}.weight(0) > PlannerConfig{}.weight(1));
}
