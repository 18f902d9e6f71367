#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbnr {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double pi = std::numbers::pi;

/// Half-thickness of the tubular neighborhood around a plane; all zero
/// comparisons of signed distances use it. Meshes are assumed O(1)-sized.
inline constexpr double zero_tol = 1e-14;

/// Threshold on 1 - <n_f, n>^2 below which a face counts as parallel.
inline constexpr double parallel_tol = 1e-12;

/// Volume fractions outside [eps, 1 - eps] are bulk.
inline constexpr double default_eps_alpha = 1e-9;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spherical angles of an orientation: phi in [0, 2pi), theta in [0, pi].
struct Angles {
  double phi = 0.0;
  double theta = 0.0;
};

inline Vec3 normal_from_angles(double phi, double theta) {
  return {std::cos(phi) * std::sin(theta), std::sin(phi) * std::sin(theta), std::cos(theta)};
}

inline Vec3 dnormal_dphi(double phi, double theta) {
  return {-std::sin(phi) * std::sin(theta), std::cos(phi) * std::sin(theta), 0.0};
}

inline Vec3 dnormal_dtheta(double phi, double theta) {
  return {std::cos(phi) * std::cos(theta), std::sin(phi) * std::cos(theta), -std::sin(theta)};
}

/// Inverse of normal_from_angles. At the poles phi is set to 0.
inline Angles angles_from_normal(const Vec3& n) {
  const Vec3 u = n.normalized();
  const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
  if (std::hypot(u.x(), u.y()) < 1e-15) return {0.0, theta};
  double phi = std::atan2(u.y(), u.x());
  if (phi < 0.0) phi += 2.0 * pi;
  if (phi >= 2.0 * pi) phi -= 2.0 * pi;
  return {phi, theta};
}

/// Maps an arbitrary angle pair back onto [0,2pi) x [0,pi] without changing
/// the normal it represents.
inline Angles wrap_angles(double phi, double theta) {
  theta = std::fmod(theta, 2.0 * pi);
  if (theta < 0.0) theta += 2.0 * pi;
  if (theta > pi) {
    phi += pi;
    theta = 2.0 * pi - theta;
  }
  phi = std::fmod(phi, 2.0 * pi);
  if (phi < 0.0) phi += 2.0 * pi;
  return {phi, theta};
}

/// Plane {x : <x - x_base, n(phi,theta)> = s}. Its negative halfspace
/// {<x - x_base, n> <= s} is the "interior" phase.
struct Plane {
  double phi = 0.0;
  double theta = 0.0;
  double s = 0.0;
  Vec3 x_base = Vec3::Zero();

  static Plane from_normal(const Vec3& n, double s, const Vec3& x_base) {
    const Angles a = angles_from_normal(n);
    return {a.phi, a.theta, s, x_base};
  }

  Vec3 normal() const { return normal_from_angles(phi, theta); }
  Vec3 dn_dphi() const { return dnormal_dphi(phi, theta); }
  Vec3 dn_dtheta() const { return dnormal_dtheta(phi, theta); }

  /// Signed level set lambda(x) = <x - x_base, n> - s.
  double level(const Vec3& x) const { return (x - x_base).dot(normal()) - s; }

  /// Same point set, opposite orientation.
  Plane flipped() const {
    const Angles a = wrap_angles(phi + pi, pi - theta);
    return {a.phi, a.theta, -s, x_base};
  }
};

/// Status of a point with respect to a signed distance value.
inline int point_status(double level) {
  if (std::abs(level) < zero_tol) return 0;
  return level > 0.0 ? 1 : -1;
}

/// Closed polyhedron given by its vertices and planar faces; every face
/// loop is counter-clockwise with respect to the outward normal.
class Polyhedron {
 public:
  Polyhedron() = default;

  Polyhedron(std::vector<Vec3> vertices, std::vector<std::vector<int>> faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    compute_geometry();
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::vector<int>>& faces() const { return faces_; }
  const Vec3& face_normal(std::size_t f) const { return face_normals_[f]; }
  double face_area(std::size_t f) const { return face_areas_[f]; }
  double volume() const { return volume_; }
  const Vec3& centroid() const { return centroid_; }

  /// Largest vertex-to-vertex distance.
  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (std::size_t j = i + 1; j < vertices_.size(); ++j)
        d = std::max(d, (vertices_[i] - vertices_[j]).norm());
    return d;
  }

 private:
  void compute_geometry() {
    face_normals_.resize(faces_.size());
    face_areas_.resize(faces_.size());
    volume_ = 0.0;
    Vec3 moment = Vec3::Zero();
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const auto& loop = faces_[f];
      if (loop.size() < 3) throw GeometryError("polyhedron face with fewer than 3 vertices");
      Vec3 area_vec = Vec3::Zero();
      for (std::size_t m = 0; m < loop.size(); ++m) {
        area_vec += vertices_[loop[m]].cross(vertices_[loop[(m + 1) % loop.size()]]);
      }
      area_vec *= 0.5;
      face_areas_[f] = area_vec.norm();
      face_normals_[f] = face_areas_[f] > 0.0 ? Vec3(area_vec / face_areas_[f]) : Vec3::Zero();
      // fan from the first vertex
      const Vec3& a = vertices_[loop[0]];
      for (std::size_t m = 1; m + 1 < loop.size(); ++m) {
        const Vec3& b = vertices_[loop[m]];
        const Vec3& c = vertices_[loop[m + 1]];
        const double v6 = a.dot(b.cross(c));
        volume_ += v6 / 6.0;
        moment += v6 / 24.0 * (a + b + c);
      }
    }
    centroid_ = volume_ != 0.0 ? Vec3(moment / volume_) : Vec3::Zero();
  }

  std::vector<Vec3> vertices_;
  std::vector<std::vector<int>> faces_;
  std::vector<Vec3> face_normals_;
  std::vector<double> face_areas_;
  double volume_ = 0.0;
  Vec3 centroid_ = Vec3::Zero();
};

/// Polygon area vector (Newell) and centroid of a planar loop.
inline std::pair<Vec3, Vec3> polygon_area_centroid(std::span<const Vec3> pts) {
  Vec3 area_vec = Vec3::Zero();
  const Vec3& o = pts[0];
  for (std::size_t m = 1; m + 1 < pts.size(); ++m) area_vec += 0.5 * (pts[m] - o).cross(pts[m + 1] - o);
  const double area = area_vec.norm();
  if (area == 0.0) return {area_vec, o};
  const Vec3 unit = area_vec / area;
  Vec3 moment = Vec3::Zero();
  for (std::size_t m = 1; m + 1 < pts.size(); ++m) {
    const double w = 0.5 * (pts[m] - o).cross(pts[m + 1] - o).dot(unit);
    moment += w * (o + pts[m] + pts[m + 1]) / 3.0;
  }
  return {area_vec, moment / area};
}

// Convenience builders for the reference cells used across tests and tools.

inline Polyhedron make_box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v{{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                      {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                      {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
  std::vector<std::vector<int>> f{{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                  {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  return {std::move(v), std::move(f)};
}

/// Tetrahedron; the vertex order is fixed up so the result is positively oriented.
inline Polyhedron make_tetrahedron(Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
  if ((b - a).cross(c - a).dot(d - a) < 0.0) std::swap(b, c);
  std::vector<Vec3> v{a, b, c, d};
  std::vector<std::vector<int>> f{{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
  return {std::move(v), std::move(f)};
}

/// Hexahedron in VTK vertex order (bottom loop 0-3, top loop 4-7).
inline Polyhedron make_hexahedron(const std::array<Vec3, 8>& x) {
  std::vector<Vec3> v(x.begin(), x.end());
  std::vector<std::vector<int>> f{{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                  {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  return {std::move(v), std::move(f)};
}

}  // namespace fbnr
