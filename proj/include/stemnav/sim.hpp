#pragma once

// Fixed-step closed loop: every sampling period the drones scan, the planner
// runs and new references are applied; in between, drones, tethers and
// winches advance at the physics step.

#include "stemnav/planner.hpp"
#include "stemnav/scenario.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stemnav {

inline constexpr const char* kRunLogSchema = "stemnav.runlog/1";

struct CollisionMetrics {
  double min_drone_distance_m = 0.0;   ///< signed; negative inside an obstacle
  double min_tether_distance_m = 0.0;  ///< over inner tether nodes; inf without tethers
  bool collision = false;
};

/// Signed scene distances of the drones and of every inner tether node.
CollisionMetrics collision_metrics(const std::vector<Vec3>& drones, const std::vector<TetherState>& tethers,
                                   const Scene& scene);

/**
 * @brief Drones, tethers and winches of one scenario.
 *
 * Tether k joins drone k (first end) and drone k + 1; with a ground station
 * the last tether joins the last drone to it.
 */
class Physics {
 public:
  /// Starts at rest at the scenario positions with relaxed tethers.
  explicit Physics(const ScenarioSpec& spec);

  /// One physics step toward @p references. The winch can be frozen.
  void step(const std::vector<Vec3>& references, double dt, bool winch = true);

  /// Tracking-loop energy of every drone plus tether kinetic, gravitational
  /// and elastic energy.
  double energy() const;

  /// First drone or inner tether node inside an obstacle, if any.
  std::optional<std::string> collision(const Scene& scene) const;

  const std::vector<DroneState>& drones() const { return drones_; }
  const std::vector<TetherState>& tethers() const { return tethers_; }
  std::vector<Vec3> positions() const;
  std::vector<Vec3> velocities() const;
  std::vector<double> lengths() const;

 private:
  Endpoint first_end(std::size_t tether) const;
  Endpoint second_end(std::size_t tether) const;

  const ScenarioSpec* spec_;
  std::vector<DroneState> drones_;
  std::vector<TetherState> tethers_;
  std::optional<Vec3> station_;
};

enum class Outcome { success, collision, timeout };

const char* to_string(Outcome outcome);

struct StepRecord {
  int index = 0;
  double time_s = 0.0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> tether_lengths;
  std::vector<double> vertical_yaws;
  PlannerOutput plan;
  CollisionMetrics metrics;
  std::vector<ScanPair> scans;  ///< kept only when the scenario logs scans
};

/// Property checks made on every record while running.
struct InvariantCounts {
  int references_inside_obstacles = 0;
  int residual_violations = 0;    ///< QP residual above 1e-6
  int plane_fixing_violations = 0;
  int line_of_sight_violations = 0;
  int clearance_violations = 0;   ///< predicted lowest point below the required height
};

struct RunSummary {
  Outcome outcome = Outcome::timeout;
  double end_time_s = 0.0;
  std::optional<double> time_to_goal_s;
  std::string collision_detail;
  int records = 0;
  int hold_steps = 0;
  int fallback_steps = 0;
  int plane_switches = 0;
  bool leader_limited_by_follower = false;
  int clearance_active_steps = 0;
  double min_drone_distance_m = 0.0;
  double min_tether_distance_m = 0.0;
  double max_residual = 0.0;
  bool last_drone_confined = true;  ///< last drone's XY inside the confinement box at every record
  InvariantCounts invariants;
};

struct RunLog {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<StepRecord> records;
  RunSummary summary;

  /// Line-delimited JSON: a header, one object per record, a summary.
  void write_jsonl(std::ostream& out) const;
  std::string to_jsonl() const;
};

/// True when the scenario needs a catenary table (clearance rows enabled and
/// at least two drones).
bool needs_table(const ScenarioSpec& spec);

/// Table for the scenario from @p cache_dir, built and stored on a miss.
std::optional<CatenaryTable> prepare_table(const ScenarioSpec& spec, const std::filesystem::path& cache_dir,
                                           bool* cache_hit = nullptr);

/// Cache directory from STEMNAV_TABLE_CACHE, else ".stemnav-cache".
std::filesystem::path default_table_cache();

/**
 * @brief Runs the closed loop until the leader is within the goal tolerance,
 * a drone or tether node enters an obstacle, or max time elapses.
 *
 * Throws ConfigError when the scenario is inconsistent with its scene (start
 * inside an obstacle, tether outside the table).
 */
RunLog run(const ScenarioSpec& spec, const CatenaryTable* table);

}  // namespace stemnav
