#include "stemnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stemnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

Vec2 direction(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Left normal of a boundary direction.
Vec2 left_normal(double angle) { return {-std::sin(angle), std::cos(angle)}; }

bool full_circle(const ScanVector& scan) {
  return std::abs(static_cast<double>(scan.size()) * scan.angular_resolution_rad - 2.0 * kPi) < 1e-9;
}

}  // namespace

void PlannerConfig::validate(std::size_t drones, double max_range_m) const {
  if (!(goal_offset_m > 0.0)) throw std::invalid_argument("planner goal offset must be positive");
  if (!weights.empty() && weights.size() != drones)
    throw std::invalid_argument("planner weights must list one value per drone");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("planner weights must be positive");
  if (!(sampling_period_s > 0.0)) throw std::invalid_argument("planner sampling period must be positive");
  if (!(free_range_m > 0.0) || free_range_m > max_range_m)
    throw std::invalid_argument("planner free range must be in (0, lidar max range]");
  if (!(clearance_margin_m >= 0.0)) throw std::invalid_argument("planner clearance margin must be >= 0");
  if (!(confinement_radius_m > 0.0)) throw std::invalid_argument("planner confinement radius must be positive");
  if (!(goal_tolerance_m > 0.0)) throw std::invalid_argument("planner goal tolerance must be positive");
  if (!(unmask_window_rad >= 0.0)) throw std::invalid_argument("planner unmask window must be >= 0");
  if (!(unmask_margin_m >= 0.0)) throw std::invalid_argument("planner unmask margin must be >= 0");
  if (!(reference_box_m > 0.0)) throw std::invalid_argument("planner reference box must be positive");
}

double PlannerConfig::weight(std::size_t drone) const {
  if (!weights.empty()) return weights.at(drone);
  return drone == 0 ? 0.9 : 0.5;
}

std::vector<Vec3> compute_goals(const std::vector<Vec3>& positions, const Vec3& poi, double goal_offset) {
  if (positions.empty()) throw std::invalid_argument("compute_goals: empty formation");
  std::vector<Vec3> goals{poi};
  std::optional<Vec3> last_dir;
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    const Vec3 d = goals[i] - positions[i];
    const double n = d.norm();
    if (n >= 1e-6) last_dir = d / n;
    if (last_dir)
      goals.push_back(goals[i] - goal_offset * *last_dir);
    else
      goals.push_back(positions[i]);
  }
  return goals;
}

double FreeSector::width() const {
  if (unconstrained) return 2.0 * kPi;
  const int span = ((hi - lo) % beam_count + beam_count) % beam_count;
  return resolution_rad * span;
}

std::vector<FreeSector> extract_free_sectors(const ScanVector& scan, double free_range) {
  const int m = static_cast<int>(scan.size());
  std::vector<FreeSector> out;
  if (m == 0) return out;
  std::vector<bool> free(static_cast<std::size_t>(m));
  int free_count = 0;
  for (int j = 0; j < m; ++j) {
    const double r = scan.ranges[static_cast<std::size_t>(j)];
    free[static_cast<std::size_t>(j)] = !is_return(r) || r > free_range;
    free_count += free[static_cast<std::size_t>(j)] ? 1 : 0;
  }
  auto make = [&](int lo, int hi) {
    FreeSector s;
    s.lo = lo;
    s.hi = hi;
    s.beam_count = m;
    s.resolution_rad = scan.angular_resolution_rad;
    return s;
  };
  const bool circular = full_circle(scan);
  if (free_count == 0) return out;
  if (free_count == m) {
    auto s = make(0, m - 1);
    s.unconstrained = circular;
    out.push_back(s);
    return out;
  }

  if (circular) {
    // Start just after a blocked beam so that no run is split at the seam.
    int start = 0;
    while (free[static_cast<std::size_t>(start)]) ++start;
    int run_lo = -1;
    for (int step = 1; step <= m; ++step) {
      const int j = (start + step) % m;
      if (free[static_cast<std::size_t>(j)]) {
        if (run_lo < 0) run_lo = j;
      } else if (run_lo >= 0) {
        out.push_back(make(run_lo, (j - 1 + m) % m));
        run_lo = -1;
      }
    }
  } else {
    int run_lo = -1;
    for (int j = 0; j <= m; ++j) {
      const bool f = j < m && free[static_cast<std::size_t>(j)];
      if (f && run_lo < 0) run_lo = j;
      if (!f && run_lo >= 0) {
        out.push_back(make(run_lo, j - 1));
        run_lo = -1;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const FreeSector& a, const FreeSector& b) { return a.lo < b.lo; });
  return out;
}

HalfplaneSet sector_to_halfplanes(const FreeSector& sector, const Vec2& drone) {
  HalfplaneSet set;
  if (sector.unconstrained) return set;
  const double a = sector.lo_angle();
  const double width = sector.width();
  if (width > kPi + 1e-9) throw std::invalid_argument("sector_to_halfplanes: sector wider than pi");
  if (width <= 0.0) {
    // Single free beam: the ray from the drone along it.
    const Vec2 n = left_normal(a);
    set.add(n, n.dot(drone));
    set.add(-n, -n.dot(drone));
    const Vec2 e = direction(a);
    set.add(-e, -e.dot(drone));
    return set;
  }
  const double b = sector.hi_angle();
  // The bisector a + width/2 has a positive component along the left normal
  // of the lo boundary and a negative one along that of the hi boundary.
  const Vec2 n_lo = -left_normal(a);
  const Vec2 n_hi = left_normal(b);
  set.add(n_lo, n_lo.dot(drone));
  set.add(n_hi, n_hi.dot(drone));
  return set;
}

HalfplaneSet deconvexify(const FreeSector& sector, const Vec2& drone, const Vec2& goal) {
  HalfplaneSet set;
  if (sector.unconstrained) return set;
  const Vec2 v = goal - drone;
  const double score_lo = std::abs(direction(sector.lo_angle()).dot(v));
  const double score_hi = std::abs(direction(sector.hi_angle()).dot(v));
  if (score_hi > score_lo) {
    const Vec2 n = left_normal(sector.hi_angle());
    set.add(n, n.dot(drone));
  } else {
    const Vec2 n = -left_normal(sector.lo_angle());
    set.add(n, n.dot(drone));
  }
  return set;
}

HalfplaneSet sector_constraint(const FreeSector& sector, const Vec2& drone, const Vec2& goal) {
  if (sector.unconstrained) return {};
  if (sector.width() > kPi + 1e-9) return deconvexify(sector, drone, goal);
  return sector_to_halfplanes(sector, drone);
}

double sector_score(const FreeSector& sector, const Vec2& drone, const Vec2& goal) {
  const Vec2 v = goal - drone;
  return std::max(std::abs(direction(sector.lo_angle()).dot(v)), std::abs(direction(sector.hi_angle()).dot(v)));
}

std::vector<std::size_t> rank_sectors(const std::vector<FreeSector>& sectors, const Vec2& drone,
                                      const Vec2& goal) {
  std::vector<double> score(sectors.size());
  for (std::size_t i = 0; i < sectors.size(); ++i) score[i] = sector_score(sectors[i], drone, goal);
  std::vector<std::size_t> order(sectors.size());
  std::iota(order.begin(), order.end(), 0);
  const double scale = std::max(1.0, (goal - drone).norm());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(score[a] - score[b]) > 1e-12 * scale) return score[a] > score[b];
    return sectors[a].lo < sectors[b].lo;
  });
  return order;
}

std::size_t select_sector(const std::vector<FreeSector>& sectors, const Vec2& drone, const Vec2& goal) {
  if (sectors.empty()) throw std::invalid_argument("select_sector: no free sector");
  return rank_sectors(sectors, drone, goal).front();
}

UnmaskResult unmask_goal(const ScanVector& scan, const Vec2& drone, const Vec2& goal, double window_rad,
                         double margin) {
  UnmaskResult out{scan, false, (goal - drone).norm(), Vec2::Zero()};
  const auto m = scan.size();
  if (m == 0 || out.goal_distance < 1e-9) return out;
  out.goal_direction = (goal - drone) / out.goal_distance;
  double bearing = std::atan2(out.goal_direction.y(), out.goal_direction.x());
  if (bearing < 0.0) bearing += 2.0 * kPi;
  const double res = scan.angular_resolution_rad;
  const bool circular = full_circle(scan);

  auto angle_gap = [&](double a) {
    double d = std::abs(a - bearing);
    if (circular) d = std::min(d, 2.0 * kPi - d);
    return d;
  };
  std::size_t nearest = 0;
  for (std::size_t j = 1; j < m; ++j)
    if (angle_gap(scan.angle(j)) < angle_gap(scan.angle(nearest))) nearest = j;
  if (angle_gap(scan.angle(nearest)) > res) return out;  // goal bearing outside a partial scan
  const double r = scan.ranges[nearest];
  if (!is_return(r) || !(out.goal_distance < r)) return out;

  const double cutoff = out.goal_distance + margin;
  for (std::size_t j = 0; j < m; ++j) {
    if (angle_gap(scan.angle(j)) > 0.5 * window_rad + 1e-12) continue;
    if (is_return(out.scan.ranges[j]) && out.scan.ranges[j] > cutoff) {
      out.scan.ranges[j] = kNoReturn;
      out.changed = true;
    }
  }
  return out;
}

HalfplaneSet embed_rows(const HalfplaneSet& rows, const ScanPlane& from, const ScanPlane& to) {
  HalfplaneSet out;
  if (rows.contradictory()) {
    out.add(Vec2::Zero(), -1.0);
    return out;
  }
  // q = B_from^T (to.offset + B_to w - from.offset)
  const Eigen::Matrix2d M = from.basis().transpose() * to.basis();
  const Vec2 shift = from.basis().transpose() * (to.offset() - from.offset());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const Vec2& n = rows.normal(i);
    out.add(M.transpose() * n, rows.rhs(i) - n.dot(shift));
  }
  return out;
}

namespace {

double set_distance(const HalfplaneSet& set, const Vec2& goal) {
  if (set.contradictory()) return kInf;
  try {
    return distance_to_polyhedron(goal, set);
  } catch (const GeometryError&) {
    return kInf;
  }
}

}  // namespace

PlaneCosts choose_plane(const HalfplaneSet& horizontal, const Vec2& goal_h, const HalfplaneSet& vertical,
                        const Vec2& goal_v) {
  PlaneCosts c;
  c.horizontal = set_distance(horizontal, goal_h);
  c.vertical = set_distance(vertical, goal_v);
  c.choice = c.horizontal <= c.vertical ? PlaneKind::horizontal : PlaneKind::vertical;
  return c;
}

TetherClearance tether_clearance_rows(const Vec3& first, const Vec3& second, double length,
                                      const ScanVector& second_vertical_scan, const CatenaryTable& table,
                                      double margin) {
  TetherClearance out;
  const ScanPlane& plane = second_vertical_scan.plane;
  // Chord in the scan chart of the second drone.
  const Vec2 a = plane.to_plane(second);
  const Vec2 b = plane.to_plane(first);
  const double u_lo = std::min(a.x(), b.x()), u_hi = std::max(a.x(), b.x());
  if (u_hi - u_lo < 1e-9) return out;

  double top = -kInf;
  for (std::size_t j = 0; j < second_vertical_scan.size(); ++j) {
    if (!is_return(second_vertical_scan.ranges[j])) continue;
    const Vec2 q = second_vertical_scan.hit_point(j);
    if (q.x() <= u_lo || q.x() >= u_hi) continue;
    const double chord_z = a.y() + (b.y() - a.y()) * (q.x() - a.x()) / (b.x() - a.x());
    if (q.y() >= chord_z) continue;
    top = std::max(top, q.y());
  }
  if (top == -kInf) return out;

  out.active = true;
  out.obstacle_top_m = top;
  out.lowest_point_m = table.lowest_point(first, second, length);
  out.min_z_first_m = top + margin + (first.z() - out.lowest_point_m);
  out.min_z_second_m = top + margin + (second.z() - out.lowest_point_m);
  return out;
}

const char* to_string(RowSource source) {
  switch (source) {
    case RowSource::own: return "own";
    case RowSource::follower: return "follower";
    case RowSource::tether: return "tether";
    case RowSource::confinement: return "confinement";
    case RowSource::box: return "box";
  }
  return "?";
}

std::vector<Vec3> PlannerOutput::references() const {
  std::vector<Vec3> out;
  for (const auto& d : drones) out.push_back(d.reference);
  return out;
}

namespace {

struct SectorOverride {
  int drone = -1;
  PlaneKind plane = PlaneKind::horizontal;
  std::size_t rank = 0;
};

struct Attempt {
  double free_range = 0.0;
  std::vector<bool> forced_vertical;
  SectorOverride override_sector;
};

struct PlaneView {
  ScanPlane frame;
  Vec2 drone = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  std::vector<FreeSector> sectors;
  std::vector<std::size_t> ranking;
  SectorChoice choice;
  HalfplaneSet rows;
};

PlaneView analyse_plane(const ScanVector& raw, const Vec3& position, const Vec3& goal, const PlannerConfig& cfg,
                        double free_range, std::optional<std::size_t> rank) {
  PlaneView v;
  v.frame = raw.plane;
  v.frame.anchor = position;
  v.drone = v.frame.to_plane(position);
  v.goal = v.frame.to_plane(goal);

  const auto unmasked = unmask_goal(raw, v.drone, v.goal, cfg.unmask_window_rad, cfg.unmask_margin_m);
  v.choice.unmasked = unmasked.changed;
  v.sectors = extract_free_sectors(unmasked.scan, free_range);
  if (v.sectors.empty()) {
    // No free direction: pin the reference to the drone in this plane.
    v.choice.blocked = true;
    v.rows.add({1.0, 0.0}, v.drone.x());
    v.rows.add({-1.0, 0.0}, -v.drone.x());
    v.rows.add({0.0, 1.0}, v.drone.y());
    v.rows.add({0.0, -1.0}, -v.drone.y());
    return v;
  }
  v.ranking = rank_sectors(v.sectors, v.drone, v.goal);
  const std::size_t pick = v.ranking[std::min(rank.value_or(0), v.ranking.size() - 1)];
  v.choice.sector = v.sectors[pick];
  v.rows = sector_constraint(v.choice.sector, v.drone, v.goal);
  if (unmasked.changed) {
    // Stop short of the obstacle that was cleared behind the goal.
    const Vec2& g = unmasked.goal_direction;
    v.rows.add(g, g.dot(v.drone) + unmasked.goal_distance + 0.5 * cfg.unmask_margin_m);
  }
  return v;
}

struct Block {
  RowSource source;
  HalfplaneSet rows;
};

struct Solved {
  bool feasible = false;
  bool contradictory = false;
  std::vector<DronePlan> drones;
  std::vector<ActiveRow> active;
  std::vector<TetherRowInfo> tether_rows;
  double residual = 0.0;
  int rows = 0;
  std::vector<PlaneView> h, v;  // for sector fallbacks
};

HalfplaneSet z_floor(double min_z, const ScanPlane& frame) {
  // -z <= -min_z over the chart: n3 = (0, 0, -1).
  const Vec3 n3(0.0, 0.0, -1.0);
  HalfplaneSet s;
  s.add(frame.basis().transpose() * n3, -min_z - n3.dot(frame.offset()));
  return s;
}

Solved attempt_plan(const FormationState& st, const Vec3& poi, const PlannerConfig& cfg, const PlannerContext& ctx,
                    const std::vector<TetherClearance>& clearances, const Attempt& at) {
  const std::size_t n = st.positions.size();
  const auto goals = compute_goals(st.positions, poi, cfg.goal_offset_m);
  Solved out;
  out.h.resize(n);
  out.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rank_for = [&](PlaneKind k) -> std::optional<std::size_t> {
      if (at.override_sector.drone == static_cast<int>(i) && at.override_sector.plane == k)
        return at.override_sector.rank;
      return std::nullopt;
    };
    out.h[i] = analyse_plane(st.scans[i].horizontal, st.positions[i], goals[i], cfg, at.free_range,
                             rank_for(PlaneKind::horizontal));
    out.v[i] = analyse_plane(st.scans[i].vertical, st.positions[i], goals[i], cfg, at.free_range,
                             rank_for(PlaneKind::vertical));
  }

  // Plane choice from the last drone forward, so each drone sees the plane
  // (and rows) its follower settled on.
  out.drones.resize(n);
  for (std::size_t k = n; k-- > 0;) {
    DronePlan& d = out.drones[k];
    d.goal = goals[k];
    d.horizontal = out.h[k].choice;
    d.vertical = out.v[k].choice;
    HalfplaneSet hset = out.h[k].rows;
    HalfplaneSet vset = out.v[k].rows;
    if (k + 1 < n) {
      const DronePlan& f = out.drones[k + 1];
      if (f.plane == PlaneKind::horizontal) hset.append(embed_rows(f.own_rows, f.frame, out.h[k].frame));
      vset.append(embed_rows(f.own_rows, f.frame, out.v[k].frame));
    }
    d.costs = choose_plane(hset, out.h[k].goal, vset, out.v[k].goal);
    // A plane without a free beam counts as an empty set.
    if (out.h[k].choice.blocked) d.costs.horizontal = kInf;
    if (out.v[k].choice.blocked) d.costs.vertical = kInf;
    d.costs.choice = d.costs.horizontal <= d.costs.vertical ? PlaneKind::horizontal : PlaneKind::vertical;
    d.plane = at.forced_vertical[k] ? PlaneKind::vertical : d.costs.choice;
    const PlaneView& pv = d.plane == PlaneKind::horizontal ? out.h[k] : out.v[k];
    d.frame = pv.frame;
    d.own_rows = pv.rows;
  }

  // Assemble the block-diagonal problem over the 2D chart coordinates of each
  // drone's chosen plane.
  const double box = std::min(cfg.reference_box_m, at.free_range / std::sqrt(2.0));
  std::vector<std::vector<Block>> blocks(n);
  for (std::size_t k = 0; k < n; ++k) {
    const DronePlan& d = out.drones[k];
    blocks[k].push_back({RowSource::own, d.own_rows});
    if (k + 1 < n) {
      const DronePlan& f = out.drones[k + 1];
      if (f.plane == PlaneKind::horizontal || d.plane == PlaneKind::vertical)
        blocks[k].push_back({RowSource::follower, embed_rows(f.own_rows, f.frame, d.frame)});
    }
    const Vec2 here = d.frame.to_plane(st.positions[k]);
    HalfplaneSet b;
    b.add({1.0, 0.0}, here.x() + box);
    b.add({-1.0, 0.0}, -here.x() + box);
    b.add({0.0, 1.0}, here.y() + box);
    b.add({0.0, -1.0}, -here.y() + box);
    blocks[k].push_back({RowSource::box, b});
    if (k + 1 == n && ctx.ground_station) {
      const Vec3& gs = *ctx.ground_station;
      const double r = cfg.confinement_radius_m;
      HalfplaneSet c;
      c.add({1.0, 0.0}, gs.x() + r);
      c.add({-1.0, 0.0}, -gs.x() + r);
      c.add({0.0, 1.0}, gs.y() + r);
      c.add({0.0, -1.0}, -gs.y() + r);
      blocks[k].push_back({RowSource::confinement, embed_rows(c, ScanPlane::horizontal(gs), d.frame)});
    }
  }
  for (std::size_t t = 0; t < clearances.size(); ++t) {
    const auto& c = clearances[t];
    if (!c.active) continue;
    blocks[t].push_back({RowSource::tether, z_floor(c.min_z_first_m, out.drones[t].frame)});
    blocks[t + 1].push_back({RowSource::tether, z_floor(c.min_z_second_m, out.drones[t + 1].frame)});
  }

  int rows = 0;
  for (const auto& bl : blocks)
    for (const auto& b : bl) {
      if (b.rows.contradictory()) out.contradictory = true;
      rows += static_cast<int>(b.rows.rows());
    }
  if (out.contradictory) return out;

  qp::Problem p;
  p.weights.resize(static_cast<Eigen::Index>(2 * n));
  p.goal.resize(static_cast<Eigen::Index>(2 * n));
  p.A = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(2 * n));
  p.b.resize(rows);
  std::vector<std::pair<int, RowSource>> tag;
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const DronePlan& d = out.drones[k];
    const auto c = static_cast<Eigen::Index>(2 * k);
    p.weights.segment<2>(c).setConstant(cfg.weight(k));
    p.goal.segment<2>(c) = d.frame.basis().transpose() * (d.goal - d.frame.offset());
    for (const auto& b : blocks[k])
      for (std::size_t i = 0; i < b.rows.rows(); ++i, ++r) {
        p.A.block<1, 2>(r, c) = b.rows.normal(i).transpose();
        p.b[r] = b.rows.rhs(i);
        tag.emplace_back(static_cast<int>(k), b.source);
      }
  }
  out.rows = rows;

  const auto res = qp::solve(p);
  if (!res.ok()) return out;
  out.feasible = true;
  out.residual = res.residual;
  for (std::size_t k = 0; k < n; ++k) {
    DronePlan& d = out.drones[k];
    d.reference = d.frame.from_plane(res.x.segment<2>(static_cast<Eigen::Index>(2 * k)));
  }
  for (Eigen::Index i = 0; i < rows; ++i)
    if (res.multipliers[i] > 1e-9)
      out.active.push_back({tag[static_cast<std::size_t>(i)].first, tag[static_cast<std::size_t>(i)].second,
                            res.multipliers[i]});
  return out;
}

}  // namespace

PlannerOutput plan_step(const FormationState& state, const Vec3& poi, const PlannerConfig& config,
                        const PlannerContext& context) {
  const std::size_t n = state.positions.size();
  if (n == 0) throw std::invalid_argument("plan_step: empty formation");
  if (state.scans.size() != n) throw std::invalid_argument("plan_step: one scan pair per drone required");

  PlannerOutput out;
  auto hold = [&](const std::string& why) {
    out.feasible = false;
    out.fallbacks.push_back(why);
    out.drones.resize(n);
    const auto goals = compute_goals(state.positions, poi, config.goal_offset_m);
    for (std::size_t k = 0; k < n; ++k) {
      out.drones[k].goal = goals[k];
      out.drones[k].reference = state.positions[k];
      out.drones[k].frame = ScanPlane::horizontal(state.positions[k]);
    }
    out.active_rows.clear();
    out.residual = 0.0;
  };

  // Tether clearance floors between consecutive drones, from the current state.
  std::vector<TetherClearance> clearances;
  if (config.tether_clearance && context.table && n > 1) {
    if (state.tether_lengths.size() < n - 1) throw std::invalid_argument("plan_step: missing tether lengths");
    try {
      for (std::size_t t = 0; t + 1 < n; ++t)
        clearances.push_back(tether_clearance_rows(state.positions[t], state.positions[t + 1],
                                                   state.tether_lengths[t], state.scans[t + 1].vertical,
                                                   *context.table, config.clearance_margin_m));
    } catch (const TableRangeError&) {
      hold("table_range");
      return out;
    }
  }

  const std::vector<TetherClearance> original = clearances;

  // One QP attempt. The clearance floors assume the current sag; the table
  // prediction at the references is re-checked and the floors raised by any
  // shortfall. A plan still short after the last pass, or one whose sag the
  // table cannot predict, is rejected.
  constexpr int kClearancePasses = 3;
  auto try_attempt = [&](const Attempt& at) -> std::optional<Solved> {
    std::vector<TetherClearance> floors = original;
    Solved s = attempt_plan(state, poi, config, context, floors, at);
    for (int pass = 0; s.feasible; ++pass) {
      bool short_fall = false;
      for (std::size_t t = 0; t < floors.size(); ++t) {
        if (!floors[t].active) continue;
        double predicted;
        try {
          predicted = context.table->lowest_point(s.drones[t].reference, s.drones[t + 1].reference,
                                                  state.tether_lengths[t]);
        } catch (const TableRangeError&) {
          return std::nullopt;
        }
        const double need = floors[t].obstacle_top_m + config.clearance_margin_m;
        if (predicted < need - 1e-6) {
          floors[t].min_z_first_m += need - predicted;
          floors[t].min_z_second_m += need - predicted;
          short_fall = true;
        }
      }
      if (!short_fall) break;
      if (pass == kClearancePasses) return std::nullopt;
      s = attempt_plan(state, poi, config, context, floors, at);
    }
    if (!s.feasible) return std::nullopt;
    clearances = floors;
    return s;
  };

  Attempt base{config.free_range_m, std::vector<bool>(n, false), {}};
  const Solved first = attempt_plan(state, poi, config, context, original, base);
  std::optional<Solved> sol = try_attempt(base);

  // Drones carrying clearance rows move to their vertical planes.
  if (!sol) {
    bool any = false;
    for (std::size_t t = 0; t < original.size(); ++t) {
      if (!original[t].active) continue;
      for (std::size_t k : {t, t + 1})
        if (first.drones[k].plane == PlaneKind::horizontal) {
          base.forced_vertical[k] = true;
          any = true;
        }
    }
    if (any && (sol = try_attempt(base))) out.fallbacks.push_back("tether_vertical");
  }
  if (!sol) {
    Attempt at = base;
    at.free_range = 0.5 * config.free_range_m;
    if ((sol = try_attempt(at))) out.fallbacks.push_back("free_range");
  }
  for (std::size_t f = 1; f < n && !sol; ++f) {
    const PlaneKind plane = base.forced_vertical[f] ? PlaneKind::vertical : first.drones[f].plane;
    const PlaneView& pv = plane == PlaneKind::horizontal ? first.h[f] : first.v[f];
    for (std::size_t rank = 1; rank < pv.ranking.size() && !sol; ++rank) {
      Attempt at = base;
      at.override_sector = {static_cast<int>(f), plane, rank};
      if ((sol = try_attempt(at))) {
        const FreeSector& sec = pv.sectors[pv.ranking[rank]];
        out.fallbacks.push_back("sector:" + std::to_string(f + 1) + ":" + to_string(plane) + ":" +
                                std::to_string(sec.lo) + "-" + std::to_string(sec.hi));
      }
    }
  }
  if (!sol) {
    hold("hold");
    for (std::size_t t = 0; t < original.size(); ++t)
      out.tether_rows.push_back({static_cast<int>(t), original[t], original[t].lowest_point_m});
    return out;
  }

  out.drones = sol->drones;
  out.active_rows = sol->active;
  out.residual = sol->residual;
  out.qp_rows = sol->rows;
  for (std::size_t t = 0; t < clearances.size(); ++t) {
    TetherRowInfo info{static_cast<int>(t), clearances[t], 0.0};
    try {
      info.predicted_lowest_m =
          context.table->lowest_point(out.drones[t].reference, out.drones[t + 1].reference, state.tether_lengths[t]);
    } catch (const TableRangeError&) {
      info.predicted_lowest_m = -kInf;
    }
    out.tether_rows.push_back(info);
  }
  return out;
}

}  // namespace stemnav
