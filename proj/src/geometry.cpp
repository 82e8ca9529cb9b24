#include "stemnav/geometry.hpp"

#include "stemnav/qp.hpp"

#include <algorithm>
#include <cmath>

namespace stemnav {

namespace {

double coordinate_scale(const std::vector<Vec3>& pts) {
  double s = 1.0;
  for (const auto& p : pts) s = std::max(s, p.cwiseAbs().maxCoeff());
  return s;
}

bool has_volume(const std::vector<Vec3>& pts, double tol) {
  if (pts.size() < 4) return false;
  const Vec3& a = pts[0];
  // Pick the farthest point, then the point farthest from that line, then
  // check the largest distance from the resulting plane.
  std::size_t ib = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if ((pts[i] - a).norm() > (pts[ib] - a).norm()) ib = i;
  const Vec3 ab = pts[ib] - a;
  if (ab.norm() < tol) return false;
  std::size_t ic = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = ab.cross(pts[i] - a).norm();
    if (d > best) {
      best = d;
      ic = i;
    }
  }
  const Vec3 n = ab.cross(pts[ic] - a);
  if (n.norm() < tol * ab.norm()) return false;
  const Vec3 un = n.normalized();
  for (const auto& p : pts)
    if (std::abs(un.dot(p - a)) > tol) return true;
  return false;
}

std::vector<Vec3> enumerate_vertices(const std::vector<HalfSpace>& faces, double tol) {
  std::vector<Vec3> out;
  const std::size_t m = faces.size();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        Eigen::Matrix3d M;
        M.row(0) = faces[i].normal.transpose();
        M.row(1) = faces[j].normal.transpose();
        M.row(2) = faces[k].normal.transpose();
        if (std::abs(M.determinant()) < 1e-10) continue;
        const Vec3 p = M.partialPivLu().solve(Vec3(faces[i].offset, faces[j].offset, faces[k].offset));
        bool inside = true;
        for (const auto& f : faces)
          if (f.signed_distance(p) > tol) {
            inside = false;
            break;
          }
        if (!inside) continue;
        const bool dup = std::any_of(out.begin(), out.end(),
                                     [&](const Vec3& q) { return (q - p).norm() < tol; });
        if (!dup) out.push_back(p);
      }
  return out;
}

Aabb bounds_of(const std::vector<Vec3>& pts) {
  Aabb box;
  for (const auto& p : pts) box.extend(p);
  return box;
}

}  // namespace

ConvexObstacle ConvexObstacle::from_halfspaces(std::vector<HalfSpace> faces) {
  if (faces.size() < 4) throw GeometryError("obstacle needs at least 4 half-spaces to be bounded");
  double scale = 1.0;
  for (auto& f : faces) {
    const double n = f.normal.norm();
    if (!(n > 1e-12) || !f.normal.allFinite() || !std::isfinite(f.offset))
      throw GeometryError("half-space normal must be finite and nonzero");
    f.normal /= n;
    f.offset /= n;
    scale = std::max(scale, std::abs(f.offset));
  }

  // Boundedness: clip with a far box; any vertex on the box means the
  // original set extends to infinity.
  const double far = 1e6 * scale;
  std::vector<HalfSpace> clipped = faces;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = 1.0;
    clipped.push_back({e, far});
    clipped.push_back({-e, far});
  }
  const double tol = 1e-9 * scale;
  const auto clipped_vertices = enumerate_vertices(clipped, tol);
  if (clipped_vertices.empty()) throw GeometryError("half-space set is empty");
  for (const auto& v : clipped_vertices)
    if (v.cwiseAbs().maxCoeff() > 0.5 * far) throw GeometryError("half-space set is unbounded");

  ConvexObstacle ob;
  ob.faces_ = std::move(faces);
  ob.vertices_ = enumerate_vertices(ob.faces_, tol);
  if (!has_volume(ob.vertices_, tol)) throw GeometryError("half-space set has no volume");
  ob.bounds_ = bounds_of(ob.vertices_);
  return ob;
}

ConvexObstacle ConvexObstacle::from_vertices(const std::vector<Vec3>& points) {
  for (const auto& p : points)
    if (!p.allFinite()) throw GeometryError("vertex must be finite");
  const double tol = 1e-9 * coordinate_scale(points);
  if (!has_volume(points, tol)) throw GeometryError("need at least 4 non-coplanar vertices");

  std::vector<HalfSpace> faces;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        Vec3 normal = (points[j] - points[i]).cross(points[k] - points[i]);
        if (normal.norm() < tol) continue;
        normal.normalize();
        double offset = normal.dot(points[i]);
        bool below = true, above = true;
        for (const auto& p : points) {
          const double s = normal.dot(p) - offset;
          if (s > tol) below = false;
          if (s < -tol) above = false;
        }
        if (!below && !above) continue;
        if (!below) {
          normal = -normal;
          offset = -offset;
        }
        const bool dup = std::any_of(faces.begin(), faces.end(), [&](const HalfSpace& f) {
          return (f.normal - normal).norm() < 1e-9 && std::abs(f.offset - offset) < tol;
        });
        if (!dup) faces.push_back({normal, offset});
      }

  ConvexObstacle ob;
  ob.faces_ = std::move(faces);
  ob.vertices_ = enumerate_vertices(ob.faces_, tol);
  ob.bounds_ = bounds_of(ob.vertices_);
  return ob;
}

ConvexObstacle ConvexObstacle::box(const Vec3& lo, const Vec3& hi) {
  if (!((hi.array() > lo.array()).all())) throw GeometryError("box needs hi > lo on every axis");
  std::vector<HalfSpace> faces;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = 1.0;
    faces.push_back({e, hi[a]});
    faces.push_back({-e, -lo[a]});
  }
  return from_halfspaces(std::move(faces));
}

bool ConvexObstacle::contains(const Vec3& p) const {
  if (!bounds_.contains(p)) {
    // The box is built from computed vertices; fall back to the faces only
    // when p is within rounding distance of it.
    if (bounds_.distance(p) > 1e-9 * (1.0 + p.cwiseAbs().maxCoeff())) return false;
  }
  for (const auto& f : faces_)
    if (f.signed_distance(p) > 0.0) return false;
  return true;
}

double ConvexObstacle::face_distance(const Vec3& p) const {
  double d = -std::numeric_limits<double>::infinity();
  for (const auto& f : faces_) d = std::max(d, f.signed_distance(p));
  return d;
}

double ConvexObstacle::signed_distance(const Vec3& p) const {
  const double fd = face_distance(p);
  if (fd <= 0.0) return fd;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(faces_.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(faces_.size()));
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = faces_[i].normal.transpose();
    b[static_cast<Eigen::Index>(i)] = faces_[i].offset;
  }
  const auto proj = qp::project(p, A, b);
  return proj ? std::max(fd, proj->distance) : fd;
}

std::optional<std::pair<double, double>> ConvexObstacle::aabb_window(const Vec3& origin,
                                                                     const Vec3& dir) const {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < bounds_.lo[a] - 1e-9 || origin[a] > bounds_.hi[a] + 1e-9) return std::nullopt;
      continue;
    }
    double ta = (bounds_.lo[a] - origin[a]) / dir[a];
    double tb = (bounds_.hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

bool point_in_scene(const Vec3& p, const Scene& scene) {
  if (scene.ground && p.z() <= 0.0) return true;
  return std::any_of(scene.obstacles.begin(), scene.obstacles.end(),
                     [&](const ConvexObstacle& o) { return o.contains(p); });
}

double scene_signed_distance(const Vec3& p, const Scene& scene) {
  double best = scene.ground ? p.z() : std::numeric_limits<double>::infinity();
  for (const auto& o : scene.obstacles) {
    if (o.bounds().distance(p) >= best) continue;
    best = std::min(best, o.signed_distance(p));
  }
  return best;
}

namespace {

void check_ray_args(const Vec3& direction, double max_range, double step) {
  if (std::abs(direction.norm() - 1.0) > 1e-6) throw std::invalid_argument("ray direction must be unit length");
  if (!(step > 0.0)) throw std::invalid_argument("ray sample step must be positive");
  if (!(max_range > 0.0)) throw std::invalid_argument("ray max range must be positive");
}

long last_sample(double max_range, double step) {
  return static_cast<long>(std::floor(max_range / step + 1e-9));
}

Vec3 sample(const Vec3& origin, const Vec3& dir, long k, double step) {
  return origin + (static_cast<double>(k) * step) * dir;
}

}  // namespace

double ray_cast(const Vec3& origin, const Vec3& direction, const Scene& scene, double max_range,
                double step) {
  check_ray_args(direction, max_range, step);
  const long kmax = last_sample(max_range, step);
  long best = kmax + 1;

  auto scan_window = [&](double t0, double t1, auto&& inside) {
    long k = std::max(1L, static_cast<long>(std::ceil(t0 / step)) - 1);
    const long k_end = std::min(best - 1, static_cast<long>(std::min(std::floor(t1 / step) + 1.0, 1e15)));
    for (; k <= k_end; ++k)
      if (inside(sample(origin, direction, k, step))) {
        best = k;
        return;
      }
  };

  if (scene.ground) {
    if (origin.z() <= 0.0) {
      scan_window(0.0, max_range, [](const Vec3& p) { return p.z() <= 0.0; });
    } else if (direction.z() < 0.0) {
      const double tg = origin.z() / -direction.z();
      if (tg <= max_range + step)
        scan_window(tg, max_range, [](const Vec3& p) { return p.z() <= 0.0; });
    }
  }
  for (const auto& ob : scene.obstacles) {
    const auto w = ob.aabb_window(origin, direction);
    if (!w || w->second < 0.0) continue;
    if (w->first > static_cast<double>(best) * step) continue;
    scan_window(std::max(0.0, w->first), w->second, [&](const Vec3& p) { return ob.contains(p); });
  }
  return best <= kmax ? static_cast<double>(best) * step : kNoReturn;
}

double ray_cast_reference(const Vec3& origin, const Vec3& direction, const Scene& scene,
                          double max_range, double step) {
  check_ray_args(direction, max_range, step);
  const long kmax = last_sample(max_range, step);
  for (long k = 1; k <= kmax; ++k)
    if (point_in_scene(sample(origin, direction, k, step), scene)) return static_cast<double>(k) * step;
  return kNoReturn;
}

void HalfplaneSet::add(const Vec2& normal, double rhs) {
  const double n = normal.norm();
  if (!(n > 1e-12)) {
    if (rhs < -1e-12) contradictory_ = true;
    return;
  }
  normals_.push_back(normal / n);
  rhs_.push_back(rhs / n);
}

void HalfplaneSet::append(const HalfplaneSet& other) {
  normals_.insert(normals_.end(), other.normals_.begin(), other.normals_.end());
  rhs_.insert(rhs_.end(), other.rhs_.begin(), other.rhs_.end());
  contradictory_ = contradictory_ || other.contradictory_;
}

double HalfplaneSet::violation(const Vec2& p) const {
  double v = contradictory_ ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < normals_.size(); ++i) v = std::max(v, normals_[i].dot(p) - rhs_[i]);
  return v;
}

bool HalfplaneSet::contains(const Vec2& p, double tol) const { return violation(p) <= tol; }

Eigen::MatrixXd HalfplaneSet::matrix() const {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(normals_.size()), 2);
  for (std::size_t i = 0; i < normals_.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = normals_[i].transpose();
  return A;
}

Eigen::VectorXd HalfplaneSet::vector() const {
  return Eigen::Map<const Eigen::VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
}

double distance_to_polyhedron(const Vec2& p, const HalfplaneSet& set) {
  if (set.contradictory()) throw GeometryError("polyhedron is empty");
  if (set.contains(p, 0.0)) return 0.0;
  const auto proj = qp::project(p, set.matrix(), set.vector());
  if (!proj) throw GeometryError("polyhedron is empty");
  return proj->distance;
}

}  // namespace stemnav
