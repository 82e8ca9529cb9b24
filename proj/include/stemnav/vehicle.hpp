#pragma once

// Point-mass drone with a PD position-tracking loop standing in for the
// attitude-level local controller, plus the automatic winch length law.

#include "stemnav/geometry.hpp"

namespace stemnav {

struct VehicleParams {
  double mass_kg = 12.0;
  double kp_1_s2 = 4.0;  ///< position gain, acceleration per metre of error
  double kd_1_s = 4.0;   ///< velocity gain
  double max_speed_m_s = 2.0;
  double max_thrust_n = 2.0 * 12.0 * 9.81;
  double gravity_m_s2 = 9.81;
  /// Time for a 1 m step to settle within 1 cm, no saturation, no tether.
  double settling_time_s = 4.0;

  /// Checks positivity, hover margin and that the closed loop is stable and
  /// non-oscillating (kd^2 >= 4 kp).
  void validate() const;

  bool operator==(const VehicleParams&) const = default;
};

struct DroneState {
  int index = 1;  ///< 1 = leader
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 reference = Vec3::Zero();
};

/**
 * @brief One semi-implicit Euler step of the tracking loop.
 *
 * Commanded thrust m (kp (p_ref - p) - kd v + g e_z) is clipped to max
 * thrust; the external force (tether reactions) acts on top. The resulting
 * speed is clipped to max_speed.
 */
DroneState vehicle_step(const DroneState& state, const Vec3& reference, const Vec3& external_force,
                        const VehicleParams& params, double dt);

/// Lyapunov energy of the tracking loop: kinetic plus the PD spring term.
double vehicle_energy(const DroneState& state, const VehicleParams& params);

struct WinchParams {
  double slack_factor = 1.05;
  double max_rate_m_s = 1.0;
  double min_length_m = 5.0;

  void validate() const;

  bool operator==(const WinchParams&) const = default;
};

/// Moves L toward slack_factor * |a - b| by at most max_rate * dt, never below
/// min_length.
double winch_update(double length, const Vec3& a, const Vec3& b, const WinchParams& params, double dt);

}  // namespace stemnav
