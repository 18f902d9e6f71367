#pragma once

#include "fbnr/fbnr.hpp"
#include "oracle/clip_oracle.hpp"

#include <random>

namespace testutil {

using fbnr::Polyhedron;
using fbnr::Vec3;

inline oracle::P3 to_p3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline oracle::ConvexPolyhedron to_oracle(const Polyhedron& P) {
  oracle::ConvexPolyhedron out;
  for (const auto& loop : P.faces()) {
    oracle::Polygon g;
    for (int v : loop) g.push_back(to_p3(P.vertices()[v]));
    out.push_back(std::move(g));
  }
  return out;
}

/// Builds an indexed polyhedron from oracle polygons, merging coincident points.
inline Polyhedron from_oracle(const oracle::ConvexPolyhedron& poly, double merge_tol = 1e-10) {
  std::vector<Vec3> verts;
  std::vector<std::vector<int>> faces;
  auto index_of = [&](const oracle::P3& p) {
    const Vec3 q(p.x, p.y, p.z);
    for (std::size_t i = 0; i < verts.size(); ++i)
      if ((verts[i] - q).norm() < merge_tol) return static_cast<int>(i);
    verts.push_back(q);
    return static_cast<int>(verts.size() - 1);
  };
  for (const auto& f : poly) {
    std::vector<int> loop;
    for (const auto& p : f) {
      const int id = index_of(p);
      if (std::find(loop.begin(), loop.end(), id) == loop.end()) loop.push_back(id);
    }
    if (loop.size() >= 3) faces.push_back(std::move(loop));
  }
  return {std::move(verts), std::move(faces)};
}

/// Volume fraction below the plane by brute-force clipping.
inline double oracle_alpha(const Polyhedron& P, const fbnr::Plane& pl) {
  const Vec3 n = pl.normal();
  const double d = pl.s + pl.x_base.dot(n);
  const auto cut = oracle::clip(to_oracle(P), to_p3(n), d);
  return oracle::volume(cut) / oracle::volume(to_oracle(P));
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }

  Vec3 point(double r = 1.0) { return {uniform(-r, r), uniform(-r, r), uniform(-r, r)}; }

  Vec3 unit() {
    Vec3 v;
    do v = point(); while (v.norm() < 0.1 || v.norm() > 1.0);
    return v.normalized();
  }

  Polyhedron tetrahedron() {
    for (;;) {
      Vec3 a = point(), b = point(), c = point(), d = point();
      const double v = std::abs((b - a).cross(c - a).dot(d - a)) / 6.0;
      if (v > 0.02) return fbnr::make_tetrahedron(a, b, c, d);
    }
  }

  /// Affine image of a frustum: planar faces, not a parallelepiped in general.
  Polyhedron hexahedron() {
    for (;;) {
      const double k = uniform(0.5, 1.0);
      std::array<Vec3, 8> ref{Vec3(-1, -1, -1), Vec3(1, -1, -1), Vec3(1, 1, -1), Vec3(-1, 1, -1),
                              Vec3(-k, -k, 1),  Vec3(k, -k, 1),  Vec3(k, k, 1),  Vec3(-k, k, 1)};
      fbnr::Mat3 M;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M(i, j) = uniform(-0.6, 0.6) + (i == j ? 0.8 : 0.0);
      if (M.determinant() < 0.2) continue;
      const Vec3 t = point(0.5);
      std::array<Vec3, 8> x;
      for (int i = 0; i < 8; ++i) x[i] = M * ref[i] * 0.5 + t;
      return fbnr::make_hexahedron(x);
    }
  }

  /// Box clipped by a few random halfspaces through points near its center.
  Polyhedron convex() {
    for (;;) {
      auto poly = oracle::box({-1, -1, -1}, {1, 1, 1});
      const int cuts = integer(2, 6);
      for (int c = 0; c < cuts; ++c) {
        const Vec3 n = unit();
        const double d = uniform(0.3, 0.9);
        poly = oracle::clip(poly, to_p3(n), d);
      }
      Polyhedron P = from_oracle(poly);
      if (P.volume() > 0.5 && P.faces().size() >= 4) return P;
    }
  }

  Polyhedron any_cell() {
    switch (integer(0, 2)) {
      case 0: return tetrahedron();
      case 1: return hexahedron();
      default: return convex();
    }
  }

  /// Plane with random orientation cutting the cell transversally.
  fbnr::Plane cutting_plane(const Polyhedron& P, const Vec3& x_base) {
    const double phi = uniform(0.0, 2.0 * fbnr::pi);
    const double theta = std::acos(uniform(-1.0, 1.0));
    const Vec3 n = fbnr::normal_from_angles(phi, theta);
    double lo = 1e300, hi = -1e300;
    for (const auto& x : P.vertices()) {
      lo = std::min(lo, (x - x_base).dot(n));
      hi = std::max(hi, (x - x_base).dot(n));
    }
    return {phi, theta, uniform(lo, hi), x_base};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Smallest |lambda| over the vertices.
inline double vertex_clearance(const Polyhedron& P, const fbnr::Plane& pl) {
  double m = 1e300;
  for (const auto& x : P.vertices()) m = std::min(m, std::abs(pl.level(x)));
  return m;
}

inline Vec3 fd_gradient(const Polyhedron& P, const fbnr::Plane& pl, double h = 1e-6) {
  auto alpha = [&](double ds, double dphi, double dth) {
    return fbnr::volume_fraction(P, fbnr::Plane{pl.phi + dphi, pl.theta + dth, pl.s + ds, pl.x_base});
  };
  return {(alpha(h, 0, 0) - alpha(-h, 0, 0)) / (2 * h), (alpha(0, h, 0) - alpha(0, -h, 0)) / (2 * h),
          (alpha(0, 0, h) - alpha(0, 0, -h)) / (2 * h)};
}

}  // namespace testutil
