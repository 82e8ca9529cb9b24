#pragma once

// Lumped-mass tether: N_t inner nodes joined by N_t + 1 tension-only
// spring-damper segments, with the end points attached to drones or to the
// ground station.

#include "stemnav/geometry.hpp"

#include <stdexcept>
#include <vector>

namespace stemnav {

struct TetherParams {
  double linear_density_kg_m = 0.05;
  int inner_nodes = 10;
  double axial_stiffness_n = 1000.0;  ///< force per unit strain (EA)
  double damping_ns_m = 2.0;          ///< along-segment damper, taut segments only
  double gravity_m_s2 = 9.81;

  void validate() const;

  /// m_t = L rho / N_t
  double node_mass(double length) const { return length * linear_density_kg_m / inner_nodes; }
  double rest_length(double length) const { return length / (inner_nodes + 1); }
  /// Natural period 2 pi sqrt(m_t / k) of one node on one segment, k = EA / rest.
  double natural_period(double length) const;
  /// Largest integration step allowed at this length: natural period / 20.
  double max_stable_step(double length) const { return natural_period(length) / 20.0; }

  bool operator==(const TetherParams&) const = default;
};

struct Endpoint {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct TetherState {
  double length = 0.0;  ///< reeled-out length L
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  /// Nodes evenly spaced on the straight segment first -> second, at rest.
  static TetherState straight(const Vec3& first, const Vec3& second, double length,
                              const TetherParams& params);
};

/// Force exerted on node a by the segment (a, b). Zero when slack
/// (separation <= rest length) or when the nodes coincide; the tension never
/// goes negative. The force on b is the opposite.
Vec3 segment_force(const Endpoint& a, const Endpoint& b, double rest_length, const TetherParams& params);

struct TetherForces {
  std::vector<Vec3> accelerations;  ///< per inner node, gravity included
  Vec3 on_first = Vec3::Zero();     ///< reaction applied to the first attached body
  Vec3 on_second = Vec3::Zero();
};

TetherForces tether_accelerations(const TetherState& state, const Endpoint& first, const Endpoint& second,
                                  const TetherParams& params);

/// One semi-implicit Euler step of the inner nodes with the ends held at the
/// given states.
void advance_tether(TetherState& state, const Endpoint& first, const Endpoint& second,
                    const TetherParams& params, double dt);

/// Winch reel-in/out: the node set is kept and every rest length rescales.
inline void set_tether_length(TetherState& state, double length) { state.length = length; }

struct TetherEnergy {
  double kinetic = 0.0;
  double gravitational = 0.0;
  double elastic = 0.0;
  double total() const { return kinetic + gravitational + elastic; }
};

TetherEnergy tether_energy(const TetherState& state, const Endpoint& first, const Endpoint& second,
                           const TetherParams& params);

/// Lowest altitude over the inner nodes and both ends.
double lowest_point(const TetherState& state, const Vec3& first, const Vec3& second);

struct RelaxOptions {
  double speed_tolerance = 1e-4;  ///< m/s
  double accel_tolerance = 1e-3;  ///< m/s^2, net node acceleration
  double max_time_s = 600.0;

  bool operator==(const RelaxOptions&) const = default;
};

struct RelaxResult {
  std::vector<Vec3> positions;
  double time_s = 0.0;
  double max_speed = 0.0;
  double max_accel = 0.0;
  long steps = 0;
};

class RelaxationError : public std::runtime_error {
 public:
  RelaxationError(const std::string& what, double residual_accel)
      : std::runtime_error(what), residual_accel(residual_accel) {}
  double residual_accel;
};

/**
 * @brief Steady-state shape of a tether hanging between two fixed ends.
 *
 * Integrates the damped node dynamics (kinetic damping: velocities reset
 * whenever total kinetic energy passes a peak) until the node speed and the
 * net node acceleration fall below tolerance. Requires L >= 0.999 times the
 * end-point distance. Throws RelaxationError after max_time_s.
 */
RelaxResult relax_to_steady_state(const Vec3& first, const Vec3& second, double length,
                                  const TetherParams& params, const RelaxOptions& options = {});

}  // namespace stemnav
