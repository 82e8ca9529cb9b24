#pragma once

// Supervisory planner: from the current positions, tether lengths and LiDAR
// scans of the whole formation, compute one reference position per drone by
// solving a single QP whose constraints come from obstacle-free scan sectors.

#include "stemnav/catenary_table.hpp"
#include "stemnav/qp.hpp"
#include "stemnav/sensing.hpp"

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace stemnav {

struct PlannerConfig {
  double goal_offset_m = 5.0;       ///< spacing of each follower's goal behind its predecessor
  std::vector<double> weights;      ///< cost weight per drone; empty: 0.9 for the leader, 0.5 otherwise
  double sampling_period_s = 0.1;
  double free_range_m = 30.0;       ///< returns beyond this count as free
  double clearance_margin_m = 1.0;  ///< tether clearance above the highest obstacle under it
  double confinement_radius_m = 3.0;
  double goal_tolerance_m = 0.5;
  double unmask_window_rad = 10.0 * std::numbers::pi / 180.0;
  double unmask_margin_m = 1.0;
  /// Half-width of the box around each drone that bounds its reference,
  /// capped at free_range / sqrt(2) so the box stays inside the checked range.
  double reference_box_m = 2.0;
  bool tether_clearance = true;

  void validate(std::size_t drones, double max_range_m) const;
  double weight(std::size_t drone) const;

  bool operator==(const PlannerConfig&) const = default;
};

/// Goals: the leader's is the point of interest; each follower's lies
/// goal_offset behind its predecessor on the line from that predecessor to
/// its own goal.
std::vector<Vec3> compute_goals(const std::vector<Vec3>& positions, const Vec3& poi, double goal_offset);

/**
 * @brief Maximal circular run of free beams, [lo, hi] inclusive.
 *
 * A beam is free when it has no return or its return exceeds the free range.
 * lo > hi means the run wraps past beam 0.
 */
struct FreeSector {
  int lo = 0;
  int hi = 0;
  int beam_count = 0;
  double resolution_rad = 0.0;
  bool unconstrained = false;  ///< the whole scan is free

  bool wraps() const { return hi < lo; }
  /// resolution * (hi - lo) modulo the scan; 2 pi when unconstrained.
  double width() const;
  double lo_angle() const { return lo * resolution_rad; }
  double hi_angle() const { return hi * resolution_rad; }
};

std::vector<FreeSector> extract_free_sectors(const ScanVector& scan, double free_range);

/// Two rows through @p drone bounding a sector no wider than pi, signed so the
/// bisector is feasible. A zero-width sector yields the three rows of a ray;
/// an unconstrained one yields none.
HalfplaneSet sector_to_halfplanes(const FreeSector& sector, const Vec2& drone);

/// For a sector wider than pi: keeps only the boundary whose direction has the
/// larger |inner product| with goal - drone (ties keep the lo boundary).
HalfplaneSet deconvexify(const FreeSector& sector, const Vec2& drone, const Vec2& goal);

/// Dispatches on the sector width.
HalfplaneSet sector_constraint(const FreeSector& sector, const Vec2& drone, const Vec2& goal);

/// max(|e_lo . (goal - drone)|, |e_hi . (goal - drone)|) with e the boundary directions.
double sector_score(const FreeSector& sector, const Vec2& drone, const Vec2& goal);

/// Sector indices by decreasing score; ties by lower start beam.
std::vector<std::size_t> rank_sectors(const std::vector<FreeSector>& sectors, const Vec2& drone,
                                      const Vec2& goal);

/// Best-ranked sector. Throws std::invalid_argument on an empty list.
std::size_t select_sector(const std::vector<FreeSector>& sectors, const Vec2& drone, const Vec2& goal);

struct UnmaskResult {
  ScanVector scan;
  bool changed = false;
  double goal_distance = 0.0;
  Vec2 goal_direction = Vec2::Zero();
};

/**
 * @brief Clears the returns behind a goal that sits in front of an obstacle.
 *
 * If the beam nearest the goal bearing has a return beyond the goal, every
 * beam within half the window of that bearing whose return exceeds the goal
 * distance plus the margin becomes a no-return.
 */
UnmaskResult unmask_goal(const ScanVector& scan, const Vec2& drone, const Vec2& goal, double window_rad,
                         double margin);

/**
 * @brief Re-expresses rows n . q <= r over the chart of @p from as rows over
 * the chart of @p to, through the 3D point to.from_plane(w).
 */
HalfplaneSet embed_rows(const HalfplaneSet& rows, const ScanPlane& from, const ScanPlane& to);

struct PlaneCosts {
  double horizontal = 0.0;  ///< distance from the goal to the horizontal set; inf when empty
  double vertical = 0.0;
  PlaneKind choice = PlaneKind::horizontal;
};

/// Horizontal iff the horizontal cost does not exceed the vertical one.
PlaneCosts choose_plane(const HalfplaneSet& horizontal, const Vec2& goal_h, const HalfplaneSet& vertical,
                        const Vec2& goal_v);

struct TetherClearance {
  bool active = false;            ///< an obstacle return lies under the chord
  double obstacle_top_m = 0.0;    ///< highest such return
  double lowest_point_m = 0.0;    ///< predicted lowest cable point now
  double min_z_first_m = 0.0;     ///< lower bound on the first drone's reference altitude
  double min_z_second_m = 0.0;
};

/**
 * @brief Altitude floors keeping the tether between @p first and @p second
 * margin above the highest obstacle the second drone's vertical scan sees
 * between them and under the chord. Inactive when there is none.
 */
TetherClearance tether_clearance_rows(const Vec3& first, const Vec3& second, double length,
                                      const ScanVector& second_vertical_scan, const CatenaryTable& table,
                                      double margin);

struct FormationState {
  std::vector<Vec3> positions;  ///< index 0 is the leader
  std::vector<Vec3> velocities;
  /// Tether k joins drones k and k + 1; with a ground station the last one
  /// joins the last drone to it.
  std::vector<double> tether_lengths;
  std::vector<ScanPair> scans;
};

enum class RowSource { own, follower, tether, confinement, box };

const char* to_string(RowSource source);

struct ActiveRow {
  int drone = 0;
  RowSource source = RowSource::own;
  double multiplier = 0.0;
};

struct SectorChoice {
  bool blocked = false;  ///< no free beam: the drone is pinned in this plane
  FreeSector sector;
  bool unmasked = false;
};

struct DronePlan {
  Vec3 goal = Vec3::Zero();
  Vec3 reference = Vec3::Zero();
  PlaneKind plane = PlaneKind::horizontal;
  ScanPlane frame;  ///< chart of the chosen plane
  PlaneCosts costs;
  SectorChoice horizontal;
  SectorChoice vertical;
  HalfplaneSet own_rows;  ///< selected sector rows in the chosen plane's chart
};

struct TetherRowInfo {
  int tether = 0;
  TetherClearance clearance;
  double predicted_lowest_m = 0.0;  ///< table prediction at the emitted references
};

struct PlannerOutput {
  std::vector<DronePlan> drones;
  bool feasible = true;  ///< false: hold-position references
  std::vector<std::string> fallbacks;
  std::vector<ActiveRow> active_rows;
  std::vector<TetherRowInfo> tether_rows;
  double residual = 0.0;  ///< max(A x - b) of the solved QP
  int qp_rows = 0;

  std::vector<Vec3> references() const;
};

struct PlannerContext {
  const CatenaryTable* table = nullptr;  ///< required for tether clearance rows
  std::optional<Vec3> ground_station;    ///< enables confinement of the last drone
};

/**
 * @brief One supervisory step. Pure: depends only on its arguments.
 *
 * On infeasibility retries, in order: vertical planes for the drones carrying
 * tether clearance rows, half the free range, alternative follower sectors by
 * decreasing score; then holds every drone at its position.
 */
PlannerOutput plan_step(const FormationState& state, const Vec3& poi, const PlannerConfig& config,
                        const PlannerContext& context);

}  // namespace stemnav
