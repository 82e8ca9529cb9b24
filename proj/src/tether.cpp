#include "stemnav/tether.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace stemnav {

void TetherParams::validate() const {
  if (!(linear_density_kg_m > 0.0)) throw std::invalid_argument("tether linear density must be positive");
  if (inner_nodes < 3) throw std::invalid_argument("tether needs at least 3 inner nodes");
  if (!(axial_stiffness_n > 0.0)) throw std::invalid_argument("tether stiffness must be positive");
  if (!(damping_ns_m > 0.0)) throw std::invalid_argument("tether damping must be positive");
  if (!(gravity_m_s2 > 0.0)) throw std::invalid_argument("gravity must be positive");
}

double TetherParams::natural_period(double length) const {
  const double k = axial_stiffness_n / rest_length(length);
  return 2.0 * std::numbers::pi * std::sqrt(node_mass(length) / k);
}

TetherState TetherState::straight(const Vec3& first, const Vec3& second, double length,
                                  const TetherParams& params) {
  TetherState s;
  s.length = length;
  const int n = params.inner_nodes;
  for (int l = 1; l <= n; ++l) {
    const double t = static_cast<double>(l) / (n + 1);
    s.positions.push_back(first + t * (second - first));
    s.velocities.push_back(Vec3::Zero());
  }
  return s;
}

Vec3 segment_force(const Endpoint& a, const Endpoint& b, double rest_length, const TetherParams& params) {
  const Vec3 d = b.position - a.position;
  const double len = d.norm();
  if (len < 1e-12 || len <= rest_length) return Vec3::Zero();
  const Vec3 e = d / len;
  const double strain = (len - rest_length) / rest_length;
  const double stretch_rate = (b.velocity - a.velocity).dot(e);
  const double tension = std::max(0.0, params.axial_stiffness_n * strain + params.damping_ns_m * stretch_rate);
  return tension * e;
}

TetherForces tether_accelerations(const TetherState& state, const Endpoint& first, const Endpoint& second,
                                  const TetherParams& params) {
  const std::size_t n = state.positions.size();
  const double rest = params.rest_length(state.length);
  const double m = params.node_mass(state.length);

  TetherForces out;
  out.accelerations.assign(n, Vec3(0.0, 0.0, -params.gravity_m_s2));

  auto node = [&](std::size_t l) -> Endpoint {
    // l = 0 and l = n + 1 are the attached ends.
    if (l == 0) return first;
    if (l == n + 1) return second;
    return {state.positions[l - 1], state.velocities[l - 1]};
  };

  for (std::size_t s = 0; s <= n; ++s) {
    const Endpoint a = node(s);
    const Endpoint b = node(s + 1);
    const Vec3 f = segment_force(a, b, rest, params);
    if (s == 0)
      out.on_first = f;
    else
      out.accelerations[s - 1] += f / m;
    if (s == n)
      out.on_second = -f;
    else
      out.accelerations[s] -= f / m;
  }
  return out;
}

void advance_tether(TetherState& state, const Endpoint& first, const Endpoint& second,
                    const TetherParams& params, double dt) {
  const auto forces = tether_accelerations(state, first, second, params);
  for (std::size_t l = 0; l < state.positions.size(); ++l) {
    state.velocities[l] += dt * forces.accelerations[l];
    state.positions[l] += dt * state.velocities[l];
  }
}

TetherEnergy tether_energy(const TetherState& state, const Endpoint& first, const Endpoint& second,
                           const TetherParams& params) {
  TetherEnergy e;
  const double m = params.node_mass(state.length);
  const double rest = params.rest_length(state.length);
  for (std::size_t l = 0; l < state.positions.size(); ++l) {
    e.kinetic += 0.5 * m * state.velocities[l].squaredNorm();
    e.gravitational += m * params.gravity_m_s2 * state.positions[l].z();
  }
  const double k = params.axial_stiffness_n / rest;
  Vec3 prev = first.position;
  for (std::size_t l = 0; l <= state.positions.size(); ++l) {
    const Vec3 next = l < state.positions.size() ? state.positions[l] : second.position;
    const double stretch = (next - prev).norm() - rest;
    if (stretch > 0.0) e.elastic += 0.5 * k * stretch * stretch;
    prev = next;
  }
  return e;
}

double lowest_point(const TetherState& state, const Vec3& first, const Vec3& second) {
  double z = std::min(first.z(), second.z());
  for (const auto& p : state.positions) z = std::min(z, p.z());
  return z;
}

namespace {

// Initial guess: chord minus a parabolic sag profile, with the sag depth
// chosen so the polyline length matches L.
std::vector<Vec3> sagged_guess(const Vec3& a, const Vec3& b, double length, int n) {
  auto shape = [&](double depth) {
    std::vector<Vec3> pts;
    for (int l = 0; l <= n + 1; ++l) {
      const double t = static_cast<double>(l) / (n + 1);
      pts.push_back(a + t * (b - a) - Vec3(0.0, 0.0, 4.0 * depth * t * (1.0 - t)));
    }
    return pts;
  };
  auto polyline = [](const std::vector<Vec3>& pts) {
    double s = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
    return s;
  };
  double lo = 0.0, hi = length;
  if (polyline(shape(0.0)) < length) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (polyline(shape(mid)) < length ? lo : hi) = mid;
    }
  }
  auto pts = shape(lo);
  return {pts.begin() + 1, pts.end() - 1};
}

}  // namespace

RelaxResult relax_to_steady_state(const Vec3& first, const Vec3& second, double length,
                                  const TetherParams& params, const RelaxOptions& options) {
  params.validate();
  const double chord = (second - first).norm();
  if (!(length > 0.0) || length < 0.999 * chord)
    throw std::invalid_argument("relax_to_steady_state: length shorter than end-point distance");

  TetherState state;
  state.length = length;
  state.positions = sagged_guess(first, second, length, params.inner_nodes);
  state.velocities.assign(state.positions.size(), Vec3::Zero());

  const Endpoint a{first, Vec3::Zero()};
  const Endpoint b{second, Vec3::Zero()};
  const double dt = params.max_stable_step(length);
  const long max_steps = static_cast<long>(std::ceil(options.max_time_s / dt));

  RelaxResult out;
  double previous_ke = 0.0;
  for (long step = 1; step <= max_steps; ++step) {
    const auto forces = tether_accelerations(state, a, b, params);
    double max_accel = 0.0;
    for (const auto& acc : forces.accelerations) max_accel = std::max(max_accel, acc.norm());

    double max_speed = 0.0;
    for (const auto& v : state.velocities) max_speed = std::max(max_speed, v.norm());
    if (max_speed < options.speed_tolerance && max_accel < options.accel_tolerance) {
      out.positions = state.positions;
      out.time_s = static_cast<double>(step - 1) * dt;
      out.max_speed = max_speed;
      out.max_accel = max_accel;
      out.steps = step - 1;
      return out;
    }

    double ke = 0.0;
    for (std::size_t l = 0; l < state.positions.size(); ++l) {
      state.velocities[l] += dt * forces.accelerations[l];
      ke += state.velocities[l].squaredNorm();
    }
    if (ke < previous_ke) {
      // Past a kinetic-energy peak: restart from rest at the current shape.
      for (auto& v : state.velocities) v.setZero();
      ke = 0.0;
    } else {
      for (std::size_t l = 0; l < state.positions.size(); ++l) state.positions[l] += dt * state.velocities[l];
    }
    previous_ke = ke;
  }

  const auto forces = tether_accelerations(state, a, b, params);
  double residual = 0.0;
  for (const auto& acc : forces.accelerations) residual = std::max(residual, acc.norm());
  throw RelaxationError("tether relaxation did not converge (residual accel " + std::to_string(residual) + ")",
                        residual);
}

}  // namespace stemnav
