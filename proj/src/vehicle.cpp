#include "stemnav/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace stemnav {

void VehicleParams::validate() const {
  if (!(mass_kg > 0.0)) throw std::invalid_argument("vehicle mass must be positive");
  if (!(kp_1_s2 > 0.0) || !(kd_1_s > 0.0)) throw std::invalid_argument("vehicle gains must be positive");
  if (kd_1_s * kd_1_s < 4.0 * kp_1_s2 * (1.0 - 1e-12))
    throw std::invalid_argument("vehicle gains give an underdamped loop (need kd^2 >= 4 kp)");
  if (!(max_speed_m_s > 0.0)) throw std::invalid_argument("vehicle max speed must be positive");
  if (!(gravity_m_s2 > 0.0)) throw std::invalid_argument("gravity must be positive");
  if (!(max_thrust_n > mass_kg * gravity_m_s2)) throw std::invalid_argument("vehicle max thrust cannot hover");
  if (!(settling_time_s > 0.0)) throw std::invalid_argument("vehicle settling time must be positive");
}

DroneState vehicle_step(const DroneState& state, const Vec3& reference, const Vec3& external_force,
                        const VehicleParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("vehicle_step: dt must be positive");
  const Vec3 up(0.0, 0.0, 1.0);
  Vec3 thrust = params.mass_kg * (params.kp_1_s2 * (reference - state.position) - params.kd_1_s * state.velocity +
                                  params.gravity_m_s2 * up);
  const double t = thrust.norm();
  if (t > params.max_thrust_n) thrust *= params.max_thrust_n / t;
  const Vec3 accel = thrust / params.mass_kg - params.gravity_m_s2 * up + external_force / params.mass_kg;

  DroneState next = state;
  next.reference = reference;
  next.velocity = state.velocity + dt * accel;
  const double speed = next.velocity.norm();
  if (speed > params.max_speed_m_s) next.velocity *= params.max_speed_m_s / speed;
  next.position = state.position + dt * next.velocity;
  return next;
}

double vehicle_energy(const DroneState& state, const VehicleParams& params) {
  return 0.5 * params.mass_kg *
         (state.velocity.squaredNorm() + params.kp_1_s2 * (state.position - state.reference).squaredNorm());
}

void WinchParams::validate() const {
  if (!(slack_factor >= 1.0)) throw std::invalid_argument("winch slack factor must be >= 1");
  if (!(max_rate_m_s > 0.0)) throw std::invalid_argument("winch rate must be positive");
  if (!(min_length_m > 0.0)) throw std::invalid_argument("winch minimum length must be positive");
}

double winch_update(double length, const Vec3& a, const Vec3& b, const WinchParams& params, double dt) {
  if (!(length > 0.0)) throw std::invalid_argument("winch_update: length must be positive");
  const double target = params.slack_factor * (a - b).norm();
  const double step = params.max_rate_m_s * dt;
  const double next = length + std::clamp(target - length, -step, step);
  return std::max(next, params.min_length_m);
}

}  // namespace stemnav
