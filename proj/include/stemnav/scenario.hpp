#pragma once

// Scenario files: JSON documents tagged "schema": "stemnav.scenario/1" that
// map one-to-one onto ScenarioSpec. Physical fields carry their unit in the
// name; unknown fields are rejected and missing ones take the defaults below.

#include "stemnav/catenary_table.hpp"
#include "stemnav/planner.hpp"
#include "stemnav/sensing.hpp"
#include "stemnav/tether.hpp"
#include "stemnav/vehicle.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace stemnav {

inline constexpr const char* kScenarioSchema = "stemnav.scenario/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An obstacle as written in the file: an axis-aligned box, a vertex list or
/// a half-space list.
struct ObstacleSpec {
  enum class Kind { box, vertices, halfspaces };
  Kind kind = Kind::box;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<double> offsets;

  ConvexObstacle build() const;
  bool operator==(const ObstacleSpec&) const = default;
};

struct GroundStationSpec {
  bool enabled = true;
  Vec3 position = Vec3::Zero();

  bool operator==(const GroundStationSpec&) const = default;
};

struct ScenarioSpec {
  std::string name = "unnamed";
  std::string note;
  std::uint64_t seed = 1;
  double physics_step_s = 1e-3;
  double max_time_s = 120.0;
  bool log_scans = false;

  bool ground = true;
  std::vector<ObstacleSpec> obstacles;
  std::vector<Vec3> drones;  ///< initial positions, leader first
  GroundStationSpec ground_station;
  Vec3 poi = Vec3::Zero();

  LidarConfig lidar;
  TetherParams tether;
  VehicleParams vehicle;
  WinchParams winch;
  PlannerConfig planner;
  CatenaryGrid table_grid;
  RelaxOptions relax;

  Scene scene() const;
  /// Field-level checks; throws ConfigError. Geometric checks that need the
  /// scene (start inside an obstacle, table range) are done by the simulator.
  void validate() const;
  std::size_t tether_count() const { return drones.size() - 1 + (ground_station.enabled ? 1 : 0); }

  bool operator==(const ScenarioSpec&) const = default;
};

/// Parses a scenario document. Each override is "dotted.path=value" where the
/// value is JSON (bare words are taken as strings) and numeric path segments
/// index arrays. Throws ConfigError with line or field context.
ScenarioSpec parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {});

ScenarioSpec load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Pretty-printed document; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

}  // namespace stemnav
