#include "stemnav/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace stemnav {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CollisionMetrics collision_metrics(const std::vector<Vec3>& drones, const std::vector<TetherState>& tethers,
                                   const Scene& scene) {
  CollisionMetrics m;
  m.min_drone_distance_m = kInf;
  m.min_tether_distance_m = kInf;
  for (const auto& p : drones) {
    m.min_drone_distance_m = std::min(m.min_drone_distance_m, scene_signed_distance(p, scene));
    m.collision = m.collision || point_in_scene(p, scene);
  }
  for (const auto& t : tethers)
    for (const auto& p : t.positions) {
      m.min_tether_distance_m = std::min(m.min_tether_distance_m, scene_signed_distance(p, scene));
      m.collision = m.collision || point_in_scene(p, scene);
    }
  return m;
}

Physics::Physics(const ScenarioSpec& spec) : spec_(&spec) {
  for (std::size_t i = 0; i < spec.drones.size(); ++i) {
    DroneState d;
    d.index = static_cast<int>(i) + 1;
    d.position = spec.drones[i];
    d.reference = spec.drones[i];
    drones_.push_back(d);
  }
  if (spec.ground_station.enabled) station_ = spec.ground_station.position;
  for (std::size_t t = 0; t < spec.tether_count(); ++t) {
    const Vec3 a = first_end(t).position, b = second_end(t).position;
    const double length = std::max(spec.winch.min_length_m, spec.winch.slack_factor * (a - b).norm());
    TetherState s = TetherState::straight(a, b, length, spec.tether);
    try {
      s.positions = relax_to_steady_state(a, b, length, spec.tether, spec.relax).positions;
    } catch (const RelaxationError&) {
      // keep the straight start
    }
    tethers_.push_back(std::move(s));
  }
}

Endpoint Physics::first_end(std::size_t tether) const {
  return {drones_[tether].position, drones_[tether].velocity};
}

Endpoint Physics::second_end(std::size_t tether) const {
  if (tether + 1 < drones_.size()) return {drones_[tether + 1].position, drones_[tether + 1].velocity};
  return {*station_, Vec3::Zero()};
}

void Physics::step(const std::vector<Vec3>& references, double dt, bool winch) {
  std::vector<Vec3> external(drones_.size(), Vec3::Zero());
  std::vector<TetherForces> forces;
  forces.reserve(tethers_.size());
  for (std::size_t t = 0; t < tethers_.size(); ++t) {
    forces.push_back(tether_accelerations(tethers_[t], first_end(t), second_end(t), spec_->tether));
    external[t] += forces.back().on_first;
    if (t + 1 < drones_.size()) external[t + 1] += forces.back().on_second;
  }
  for (std::size_t t = 0; t < tethers_.size(); ++t) {
    auto& s = tethers_[t];
    for (std::size_t l = 0; l < s.positions.size(); ++l) {
      s.velocities[l] += dt * forces[t].accelerations[l];
      s.positions[l] += dt * s.velocities[l];
    }
  }
  for (std::size_t i = 0; i < drones_.size(); ++i)
    drones_[i] = vehicle_step(drones_[i], references[i], external[i], spec_->vehicle, dt);
  if (winch)
    for (std::size_t t = 0; t < tethers_.size(); ++t)
      set_tether_length(tethers_[t], winch_update(tethers_[t].length, first_end(t).position,
                                                  second_end(t).position, spec_->winch, dt));
}

double Physics::energy() const {
  double e = 0.0;
  for (const auto& d : drones_) e += vehicle_energy(d, spec_->vehicle);
  for (std::size_t t = 0; t < tethers_.size(); ++t)
    e += tether_energy(tethers_[t], first_end(t), second_end(t), spec_->tether).total();
  return e;
}

std::optional<std::string> Physics::collision(const Scene& scene) const {
  for (std::size_t i = 0; i < drones_.size(); ++i)
    if (point_in_scene(drones_[i].position, scene)) return "drone " + std::to_string(i + 1);
  for (std::size_t t = 0; t < tethers_.size(); ++t)
    for (std::size_t l = 0; l < tethers_[t].positions.size(); ++l)
      if (point_in_scene(tethers_[t].positions[l], scene))
        return "tether " + std::to_string(t + 1) + " node " + std::to_string(l + 1);
  return std::nullopt;
}

std::vector<Vec3> Physics::positions() const {
  std::vector<Vec3> out;
  for (const auto& d : drones_) out.push_back(d.position);
  return out;
}

std::vector<Vec3> Physics::velocities() const {
  std::vector<Vec3> out;
  for (const auto& d : drones_) out.push_back(d.velocity);
  return out;
}

std::vector<double> Physics::lengths() const {
  std::vector<double> out;
  for (const auto& t : tethers_) out.push_back(t.length);
  return out;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

bool needs_table(const ScenarioSpec& spec) { return spec.planner.tether_clearance && spec.drones.size() > 1; }

std::filesystem::path default_table_cache() {
  if (const char* env = std::getenv("STEMNAV_TABLE_CACHE"); env && *env) return env;
  return ".stemnav-cache";
}

std::optional<CatenaryTable> prepare_table(const ScenarioSpec& spec, const std::filesystem::path& cache_dir,
                                           bool* cache_hit) {
  if (!needs_table(spec)) return std::nullopt;
  return load_or_build_catenary_table(spec.tether, spec.table_grid, spec.relax, cache_dir, cache_hit);
}

namespace {

using nlohmann::ordered_json;

ordered_json vec(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

ordered_json number(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json sector_json(const SectorChoice& c) {
  if (c.blocked) return "blocked";
  if (c.sector.unconstrained) return "all";
  return ordered_json::array({c.sector.lo, c.sector.hi});
}

ordered_json scan_json(const ScanVector& s) {
  ordered_json r = ordered_json::array();
  for (double x : s.ranges) r.push_back(number(x));
  return r;
}

ordered_json record_json(const StepRecord& r) {
  ordered_json j;
  j["type"] = "step";
  j["k"] = r.index;
  j["t_s"] = r.time_s;
  ordered_json drones = ordered_json::array();
  for (std::size_t i = 0; i < r.positions.size(); ++i) {
    const DronePlan& d = r.plan.drones[i];
    ordered_json dj;
    dj["p_m"] = vec(r.positions[i]);
    dj["v_m_s"] = vec(r.velocities[i]);
    dj["ref_m"] = vec(d.reference);
    dj["goal_m"] = vec(d.goal);
    dj["plane"] = to_string(d.plane);
    dj["cost_h_m"] = number(d.costs.horizontal);
    dj["cost_v_m"] = number(d.costs.vertical);
    dj["sector_h"] = sector_json(d.horizontal);
    dj["sector_v"] = sector_json(d.vertical);
    dj["unmasked"] = d.horizontal.unmasked || d.vertical.unmasked;
    dj["vertical_yaw_rad"] = r.vertical_yaws[i];
    drones.push_back(dj);
  }
  j["drones"] = drones;
  j["tether_lengths_m"] = r.tether_lengths;
  j["qp"] = {{"status", r.plan.feasible ? "optimal" : "hold"},
             {"rows", r.plan.qp_rows},
             {"residual", number(r.plan.residual)}};
  j["fallbacks"] = r.plan.fallbacks;
  ordered_json active = ordered_json::array();
  for (const auto& a : r.plan.active_rows)
    active.push_back({{"drone", a.drone + 1}, {"source", to_string(a.source)}, {"multiplier", a.multiplier}});
  j["active_rows"] = active;
  ordered_json rows = ordered_json::array();
  for (const auto& t : r.plan.tether_rows) {
    if (!t.clearance.active) continue;
    rows.push_back({{"tether", t.tether + 1},
                    {"obstacle_top_m", t.clearance.obstacle_top_m},
                    {"lowest_point_m", t.clearance.lowest_point_m},
                    {"min_z_first_m", t.clearance.min_z_first_m},
                    {"min_z_second_m", t.clearance.min_z_second_m},
                    {"predicted_lowest_m", number(t.predicted_lowest_m)}});
  }
  j["clearance"] = rows;
  j["min_drone_distance_m"] = number(r.metrics.min_drone_distance_m);
  j["min_tether_distance_m"] = number(r.metrics.min_tether_distance_m);
  if (!r.scans.empty()) {
    ordered_json scans = ordered_json::array();
    for (const auto& s : r.scans) scans.push_back({{"h", scan_json(s.horizontal)}, {"v", scan_json(s.vertical)}});
    j["scans"] = scans;
  }
  return j;
}

ordered_json summary_json(const RunLog& log) {
  const RunSummary& s = log.summary;
  ordered_json j;
  j["type"] = "summary";
  j["outcome"] = to_string(s.outcome);
  j["end_time_s"] = s.end_time_s;
  j["time_to_goal_s"] = s.time_to_goal_s ? ordered_json(*s.time_to_goal_s) : ordered_json(nullptr);
  j["collision"] = s.collision_detail;
  j["records"] = s.records;
  j["hold_steps"] = s.hold_steps;
  j["fallback_steps"] = s.fallback_steps;
  j["plane_switches"] = s.plane_switches;
  j["leader_limited_by_follower"] = s.leader_limited_by_follower;
  j["clearance_active_steps"] = s.clearance_active_steps;
  j["min_drone_distance_m"] = number(s.min_drone_distance_m);
  j["min_tether_distance_m"] = number(s.min_tether_distance_m);
  j["max_residual"] = s.max_residual;
  j["last_drone_confined"] = s.last_drone_confined;
  j["invariants"] = {{"references_inside_obstacles", s.invariants.references_inside_obstacles},
                     {"residual_violations", s.invariants.residual_violations},
                     {"plane_fixing_violations", s.invariants.plane_fixing_violations},
                     {"line_of_sight_violations", s.invariants.line_of_sight_violations},
                     {"clearance_violations", s.invariants.clearance_violations}};
  return j;
}

// Per-record property checks (see InvariantCounts).
void check_record(const ScenarioSpec& spec, const Scene& scene, const StepRecord& r, InvariantCounts& c) {
  const auto& plan = r.plan;
  for (const auto& d : plan.drones)
    if (point_in_scene(d.reference, scene)) ++c.references_inside_obstacles;
  if (!plan.feasible) return;
  if (plan.residual > 1e-6) ++c.residual_violations;
  const std::size_t n = plan.drones.size();
  for (std::size_t i = 0; i < n; ++i) {
    const DronePlan& d = plan.drones[i];
    if (d.plane == PlaneKind::horizontal) {
      if (std::abs(d.reference.z() - r.positions[i].z()) > 1e-9) ++c.plane_fixing_violations;
    } else {
      const Vec3 axis = d.frame.axis();
      const Vec2 off = (d.reference - r.positions[i]).head<2>();
      if (std::abs(axis.x() * off.y() - axis.y() * off.x()) > 1e-9) ++c.plane_fixing_violations;
    }
    if (i + 1 < n && plan.drones[i + 1].plane == PlaneKind::horizontal) {
      // Both ends of the reference segment inside the follower's sector.
      const DronePlan& f = plan.drones[i + 1];
      const double tol = 1e-6;
      if (!f.own_rows.contains(f.frame.to_plane(d.reference), tol) ||
          !f.own_rows.contains(f.frame.to_plane(f.reference), tol))
        ++c.line_of_sight_violations;
    }
  }
  for (const auto& t : plan.tether_rows)
    if (t.clearance.active && t.predicted_lowest_m < t.clearance.obstacle_top_m + spec.planner.clearance_margin_m - 1e-6)
      ++c.clearance_violations;
}

}  // namespace

void RunLog::write_jsonl(std::ostream& out) const {
  ordered_json header;
  header["type"] = "header";
  header["schema"] = kRunLogSchema;
  header["scenario"] = scenario;
  header["seed"] = seed;
  out << header.dump() << '\n';
  for (const auto& r : records) out << record_json(r).dump() << '\n';
  out << summary_json(*this).dump() << '\n';
}

std::string RunLog::to_jsonl() const {
  std::ostringstream ss;
  write_jsonl(ss);
  return ss.str();
}

RunLog run(const ScenarioSpec& spec, const CatenaryTable* table) {
  spec.validate();
  const Scene scene = spec.scene();
  const std::size_t n = spec.drones.size();
  for (std::size_t i = 0; i < n; ++i)
    if (point_in_scene(spec.drones[i], scene))
      throw ConfigError("drones_m." + std::to_string(i) + ": starts inside an obstacle");
  if (needs_table(spec) && !table) throw ConfigError("scenario needs a catenary table");

  Physics physics(spec);
  if (auto hit = physics.collision(scene)) throw ConfigError("initial configuration collides: " + *hit);
  if (table) {
    const auto lengths = physics.lengths();
    for (std::size_t t = 0; t + 1 < n; ++t) {
      try {
        (void)table->lowest_point(spec.drones[t], spec.drones[t + 1], lengths[t]);
      } catch (const TableRangeError& e) {
        throw ConfigError("tether " + std::to_string(t + 1) + " starts outside the catenary table: " + e.what());
      }
    }
  }

  PlannerContext ctx;
  ctx.table = table;
  if (spec.ground_station.enabled) ctx.ground_station = spec.ground_station.position;

  RunLog log;
  log.scenario = spec.name;
  log.seed = spec.seed;
  RunSummary& sum = log.summary;
  sum.min_drone_distance_m = kInf;
  sum.min_tether_distance_m = kInf;

  const double ts = spec.planner.sampling_period_s;
  const int substeps = static_cast<int>(std::lround(ts / spec.physics_step_s));
  const double dt = ts / substeps;
  std::vector<double> yaws(n, 0.0);
  std::vector<PlaneKind> last_plane;

  for (int k = 0;; ++k) {
    const double t = k * ts;
    FormationState fs;
    fs.positions = physics.positions();
    fs.velocities = physics.velocities();
    fs.tether_lengths = physics.lengths();
    for (std::size_t i = 0; i < n; ++i) {
      yaws[i] = vertical_plane_yaw(i, fs.positions, spec.poi, yaws[i]);
      const std::uint64_t seed = mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(k)), i);
      fs.scans.push_back(scan_pair(fs.positions[i], yaws[i], spec.lidar, scene, seed));
    }

    StepRecord rec;
    rec.index = k;
    rec.time_s = t;
    rec.plan = plan_step(fs, spec.poi, spec.planner, ctx);
    rec.positions = fs.positions;
    rec.velocities = fs.velocities;
    rec.tether_lengths = fs.tether_lengths;
    rec.vertical_yaws = yaws;
    rec.metrics = collision_metrics(fs.positions, physics.tethers(), scene);
    if (spec.log_scans) rec.scans = fs.scans;

    check_record(spec, scene, rec, sum.invariants);
    sum.min_drone_distance_m = std::min(sum.min_drone_distance_m, rec.metrics.min_drone_distance_m);
    sum.min_tether_distance_m = std::min(sum.min_tether_distance_m, rec.metrics.min_tether_distance_m);
    if (!rec.plan.feasible) ++sum.hold_steps;
    if (!rec.plan.fallbacks.empty()) ++sum.fallback_steps;
    if (rec.plan.feasible) {
      sum.max_residual = std::max(sum.max_residual, rec.plan.residual);
      std::vector<PlaneKind> planes;
      for (const auto& d : rec.plan.drones) planes.push_back(d.plane);
      if (!last_plane.empty())
        for (std::size_t i = 0; i < n; ++i) sum.plane_switches += planes[i] != last_plane[i] ? 1 : 0;
      last_plane = planes;
    }
    for (const auto& a : rec.plan.active_rows)
      if (a.drone == 0 && a.source == RowSource::follower) sum.leader_limited_by_follower = true;
    for (const auto& tr : rec.plan.tether_rows)
      if (tr.clearance.active) {
        ++sum.clearance_active_steps;
        break;
      }
    if (spec.ground_station.enabled) {
      const Vec2 off = (fs.positions[n - 1] - spec.ground_station.position).head<2>();
      if (off.cwiseAbs().maxCoeff() > spec.planner.confinement_radius_m + 1e-9) sum.last_drone_confined = false;
    }

    const std::vector<Vec3> refs = rec.plan.references();
    log.records.push_back(std::move(rec));
    sum.records = static_cast<int>(log.records.size());
    sum.end_time_s = t;

    if ((fs.positions[0] - spec.poi).norm() <= spec.planner.goal_tolerance_m) {
      sum.outcome = Outcome::success;
      sum.time_to_goal_s = t;
      break;
    }
    if (t >= spec.max_time_s - 1e-9) {
      sum.outcome = Outcome::timeout;
      break;
    }

    bool collided = false;
    for (int s = 0; s < substeps; ++s) {
      physics.step(refs, dt);
      if (auto hit = physics.collision(scene)) {
        sum.outcome = Outcome::collision;
        sum.collision_detail = *hit + " at t = " + std::to_string(t + (s + 1) * dt) + " s";
        sum.end_time_s = t + (s + 1) * dt;
        collided = true;
        break;
      }
    }
    if (collided) break;
  }
  return log;
}

}  // namespace stemnav
