#include "stemnav/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace stemnav {

int LidarConfig::beam_count() const {
  return static_cast<int>(std::floor(span_rad / angular_resolution_rad + 1e-9));
}

void LidarConfig::validate() const {
  if (!(angular_resolution_rad > 0.0)) throw std::invalid_argument("lidar angular resolution must be positive");
  if (!(span_rad > 0.0) || span_rad > 2.0 * std::numbers::pi + 1e-12)
    throw std::invalid_argument("lidar span must be in (0, 2 pi]");
  if (!(max_range_m > 0.0)) throw std::invalid_argument("lidar max range must be positive");
  if (!(sample_step_m > 0.0)) throw std::invalid_argument("lidar sample step must be positive");
  if (!(noise_sigma_m >= 0.0)) throw std::invalid_argument("lidar noise sigma must be >= 0");
  if (beam_count() < 4) throw std::invalid_argument("lidar needs at least 4 beams");
}

const char* to_string(PlaneKind kind) { return kind == PlaneKind::horizontal ? "horizontal" : "vertical"; }

Vec3 ScanPlane::beam_direction(double angle) const {
  const double c = std::cos(angle), s = std::sin(angle);
  if (kind == PlaneKind::horizontal) return {c, s, 0.0};
  return c * axis() + Vec3(0.0, 0.0, s);
}

Vec2 ScanPlane::to_plane(const Vec3& p) const {
  if (kind == PlaneKind::horizontal) return p.head<2>();
  return {axis().head<2>().dot(p.head<2>() - anchor.head<2>()), p.z()};
}

Vec3 ScanPlane::from_plane(const Vec2& q) const { return offset() + basis() * q; }

Eigen::Matrix<double, 3, 2> ScanPlane::basis() const {
  Eigen::Matrix<double, 3, 2> B = Eigen::Matrix<double, 3, 2>::Zero();
  if (kind == PlaneKind::horizontal) {
    B(0, 0) = 1.0;
    B(1, 1) = 1.0;
  } else {
    B.col(0) = axis();
    B(2, 1) = 1.0;
  }
  return B;
}

Vec3 ScanPlane::offset() const {
  if (kind == PlaneKind::horizontal) return {0.0, 0.0, anchor.z()};
  return {anchor.x(), anchor.y(), 0.0};
}

Vec2 ScanVector::hit_point(std::size_t j) const {
  const Vec2 origin = plane.to_plane(plane.anchor);
  const double a = angle(j);
  return origin + ranges[j] * Vec2(std::cos(a), std::sin(a));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<double> draw_noise(const LidarConfig& cfg, std::size_t m, std::uint64_t seed) {
  std::vector<double> noise(m, 0.0);
  if (cfg.noise_sigma_m <= 0.0) return noise;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, cfg.noise_sigma_m);
  for (auto& n : noise) n = dist(rng);
  return noise;
}

double apply_noise(double range, double noise, const LidarConfig& cfg) {
  if (!is_return(range)) return range;
  // Clamp into (0, s_max]; the lower bound is one sample step.
  return std::clamp(range + noise, std::min(cfg.sample_step_m, cfg.max_range_m), cfg.max_range_m);
}

template <class Caster>
ScanVector scan_with(const Vec3& drone_pos, const ScanPlane& plane_in, const LidarConfig& cfg,
                     std::uint64_t seed, Caster&& cast, bool parallel) {
  cfg.validate();
  ScanVector scan;
  scan.plane = plane_in;
  scan.plane.anchor = drone_pos;
  scan.angular_resolution_rad = cfg.angular_resolution_rad;
  const auto m = static_cast<std::size_t>(cfg.beam_count());
  scan.ranges.assign(m, kNoReturn);
  const auto noise = draw_noise(cfg, m, seed);

  const long count = static_cast<long>(m);
  (void)parallel;
#if defined(STEMNAV_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
#endif
  for (long j = 0; j < count; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec3 dir = scan.plane.beam_direction(scan.angle(ju));
    scan.ranges[ju] = apply_noise(cast(drone_pos, dir), noise[ju], cfg);
  }
  return scan;
}

}  // namespace

ScanVector scan_plane(const Vec3& drone_pos, const ScanPlane& plane, const LidarConfig& cfg,
                      const Scene& scene, std::uint64_t seed) {
  return scan_with(
      drone_pos, plane, cfg, seed,
      [&](const Vec3& o, const Vec3& d) { return ray_cast(o, d, scene, cfg.max_range_m, cfg.sample_step_m); },
      true);
}

ScanVector scan_plane_reference(const Vec3& drone_pos, const ScanPlane& plane,
                                const LidarConfig& cfg, const Scene& scene, std::uint64_t seed) {
  return scan_with(
      drone_pos, plane, cfg, seed,
      [&](const Vec3& o, const Vec3& d) {
        return ray_cast_reference(o, d, scene, cfg.max_range_m, cfg.sample_step_m);
      },
      false);
}

ScanPair scan_pair(const Vec3& drone_pos, double vertical_yaw, const LidarConfig& cfg,
                   const Scene& scene, std::uint64_t seed) {
  ScanPair pair;
  pair.horizontal = scan_plane(drone_pos, ScanPlane::horizontal(drone_pos), cfg, scene, mix_seed(seed, 0));
  pair.vertical =
      scan_plane(drone_pos, ScanPlane::vertical(drone_pos, vertical_yaw), cfg, scene, mix_seed(seed, 1));
  pair.vertical_yaw = vertical_yaw;
  return pair;
}

double vertical_plane_yaw(std::size_t index, const std::vector<Vec3>& positions, const Vec3& poi,
                          double previous_yaw) {
  if (index >= positions.size()) throw std::out_of_range("vertical_plane_yaw: drone index");
  const Vec3& target = index == 0 ? poi : positions[index - 1];
  const Vec2 d = target.head<2>() - positions[index].head<2>();
  if (d.norm() < 1e-9) return previous_yaw;
  return std::atan2(d.y(), d.x());
}

}  // namespace stemnav
