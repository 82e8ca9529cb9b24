#pragma once

// Vector and plane primitives, convex polytope obstacles and sampled ray casting.
//
// Frame: fixed inertial (X, Y, Z), Z up, origin at the ground station.

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stemnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Range value of a beam that saw nothing within max range.
inline constexpr double kNoReturn = std::numeric_limits<double>::infinity();

inline bool is_return(double range) { return range < kNoReturn; }

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed half-space {x : normal . x <= offset}; normal has unit length.
struct HalfSpace {
  Vec3 normal;
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  double distance(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.norm();
  }
};

/**
 * @brief Bounded convex polytope, stored as both half-spaces and vertices.
 *
 * Obstacles in a scene may overlap; a non-convex shape is a union of these.
 */
class ConvexObstacle {
 public:
  /// Throws GeometryError if the set is empty, unbounded or flat.
  static ConvexObstacle from_halfspaces(std::vector<HalfSpace> faces);
  /// Convex hull of at least four non-coplanar points.
  static ConvexObstacle from_vertices(const std::vector<Vec3>& points);
  static ConvexObstacle box(const Vec3& lo, const Vec3& hi);

  bool contains(const Vec3& p) const;
  /// Max over faces of the signed face distance: <= 0 inside, a lower bound
  /// on the Euclidean distance outside.
  double face_distance(const Vec3& p) const;
  /// Euclidean distance outside, minus the penetration depth inside.
  double signed_distance(const Vec3& p) const;

  /// Parameter interval [t0, t1] of origin + t dir inside the bounding box.
  std::optional<std::pair<double, double>> aabb_window(const Vec3& origin, const Vec3& dir) const;

  const std::vector<HalfSpace>& faces() const { return faces_; }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Aabb& bounds() const { return bounds_; }

 private:
  ConvexObstacle() = default;

  std::vector<HalfSpace> faces_;
  std::vector<Vec3> vertices_;
  Aabb bounds_;
};

/// Static environment: convex obstacles plus the ground half-space Z <= 0.
struct Scene {
  std::vector<ConvexObstacle> obstacles;
  bool ground = true;
};

bool point_in_scene(const Vec3& p, const Scene& scene);

/// Signed distance to the nearest obstacle (ground included when enabled).
/// Positive outside; infinity for an empty scene without ground.
double scene_signed_distance(const Vec3& p, const Scene& scene);

/**
 * @brief Sampled LiDAR ray: first multiple of @p step along the ray that lies
 * inside any obstacle, or kNoReturn if none lies within @p max_range.
 *
 * The reported distance overestimates the true boundary by less than one
 * step: the sample one step earlier is outside every obstacle. Only samples
 * inside each obstacle's bounding box window are tested.
 */
double ray_cast(const Vec3& origin, const Vec3& direction, const Scene& scene,
                double max_range, double step);

/// Same contract as ray_cast, testing every sample against every obstacle.
/// Serial reference kept for cross-checking the windowed kernel.
double ray_cast_reference(const Vec3& origin, const Vec3& direction, const Scene& scene,
                          double max_range, double step);

/**
 * @brief Planar polyhedron {x in R^2 : A x <= b} with unit-norm rows.
 *
 * Rows whose normal vanishes are not stored: a vacuous row (0 <= b, b >= 0)
 * is dropped and a contradictory one (b < 0) marks the set empty.
 */
class HalfplaneSet {
 public:
  HalfplaneSet() = default;

  /// Adds normal . x <= rhs after scaling the row to a unit normal.
  void add(const Vec2& normal, double rhs);
  void append(const HalfplaneSet& other);

  std::size_t rows() const { return normals_.size(); }
  bool empty() const { return normals_.empty() && !contradictory_; }
  bool contradictory() const { return contradictory_; }

  const Vec2& normal(std::size_t i) const { return normals_[i]; }
  double rhs(std::size_t i) const { return rhs_[i]; }

  /// max_i (a_i . p - b_i); -inf when there are no rows.
  double violation(const Vec2& p) const;
  bool contains(const Vec2& p, double tol = 1e-9) const;

  Eigen::MatrixXd matrix() const;
  Eigen::VectorXd vector() const;

 private:
  std::vector<Vec2> normals_;
  std::vector<double> rhs_;
  bool contradictory_ = false;
};

/// Euclidean distance from p to the set; 0 inside. Throws GeometryError when
/// the set is infeasible.
double distance_to_polyhedron(const Vec2& p, const HalfplaneSet& set);

}  // namespace stemnav
