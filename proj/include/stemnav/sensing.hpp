#pragma once

// Gimbal-stabilized planar LiDARs: one horizontal and one vertical 360 degree
// scanner per drone.

#include "stemnav/geometry.hpp"

#include <cstdint>
#include <numbers>
#include <vector>

namespace stemnav {

struct LidarConfig {
  double angular_resolution_rad = std::numbers::pi / 180.0;
  double span_rad = 2.0 * std::numbers::pi;
  double max_range_m = 30.0;
  double sample_step_m = 0.05;
  double noise_sigma_m = 0.0;

  /// floor(span / resolution), guarded against rounding just below an integer.
  int beam_count() const;
  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  bool operator==(const LidarConfig&) const = default;
};

enum class PlaneKind { horizontal, vertical };

const char* to_string(PlaneKind kind);

/**
 * @brief A scan plane through a drone and its 2D coordinate chart.
 *
 * Horizontal plane: coordinates (X, Y), absolute, at the anchor's altitude.
 * Vertical plane: coordinates (u, Z) where u is the signed horizontal
 * displacement from the anchor along the in-plane axis (cos yaw, sin yaw)
 * and Z is absolute altitude. Beam angle 0 points along +X (horizontal) or
 * along the in-plane axis (vertical); angles grow toward +Y or +Z.
 */
struct ScanPlane {
  PlaneKind kind = PlaneKind::horizontal;
  Vec3 anchor = Vec3::Zero();
  double yaw = 0.0;

  static ScanPlane horizontal(const Vec3& anchor) { return {PlaneKind::horizontal, anchor, 0.0}; }
  static ScanPlane vertical(const Vec3& anchor, double yaw) { return {PlaneKind::vertical, anchor, yaw}; }

  /// Horizontal unit vector of the vertical plane's u axis.
  Vec3 axis() const { return {std::cos(yaw), std::sin(yaw), 0.0}; }
  Vec3 beam_direction(double angle) const;
  Vec2 to_plane(const Vec3& p) const;
  Vec3 from_plane(const Vec2& q) const;
  /// The 3D linear map of from_plane: p = offset() + basis() * q.
  Eigen::Matrix<double, 3, 2> basis() const;
  Vec3 offset() const;
};

/// One sweep: entry j is the range along angle j * resolution, or kNoReturn.
struct ScanVector {
  ScanPlane plane;
  double angular_resolution_rad = 0.0;
  std::vector<double> ranges;

  std::size_t size() const { return ranges.size(); }
  double angle(std::size_t j) const { return static_cast<double>(j) * angular_resolution_rad; }
  /// Detected obstacle point in plane coordinates; requires a finite range.
  Vec2 hit_point(std::size_t j) const;
};

struct ScanPair {
  ScanVector horizontal;
  ScanVector vertical;
  double vertical_yaw = 0.0;
};

/// Scans every beam in parallel. Deterministic for a given seed, independent
/// of the thread count: noise is drawn serially before the beam loop.
ScanVector scan_plane(const Vec3& drone_pos, const ScanPlane& plane, const LidarConfig& cfg,
                      const Scene& scene, std::uint64_t seed);

/// Serial reference built on ray_cast_reference; same output as scan_plane.
ScanVector scan_plane_reference(const Vec3& drone_pos, const ScanPlane& plane,
                                const LidarConfig& cfg, const Scene& scene, std::uint64_t seed);

ScanPair scan_pair(const Vec3& drone_pos, double vertical_yaw, const LidarConfig& cfg,
                   const Scene& scene, std::uint64_t seed);

/**
 * @brief Gimbal yaw for drone @p index (0-based) so that its vertical plane
 * contains its target: the point of interest for the leader, the preceding
 * drone otherwise. Keeps @p previous_yaw when the target is straight above or
 * below.
 */
double vertical_plane_yaw(std::size_t index, const std::vector<Vec3>& positions, const Vec3& poi,
                          double previous_yaw);

/// splitmix64 finalizer, used to derive independent per-scan seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace stemnav
