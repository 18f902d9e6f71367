#pragma once

#include "fbnr/mesh.hpp"

#include <map>
#include <utility>

namespace fbnr {

/// Volume fraction of a cell below a plane, with immersed face areas and
/// the gradient (d/ds, d/dphi, d/dtheta).
struct TruncationResult {
  double alpha = 0.0;
  std::vector<double> immersed_areas;
  Vec3 grad = Vec3::Zero();
  // Set when the plane contains a face, or a face is parallel to the plane
  // but only partly immersed; the derivatives are then one-sided at best.
  bool degenerate = false;
};

/// Local cubic model of alpha(s) about s0, exact within the bracket of s0.
struct CubicModel {
  double s0 = 0.0;
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;

  double eval(double s) const {
    const double z = s - s0;
    return value + z * (d1 + z * (d2 / 2.0 + z * d3 / 6.0));
  }
  double deriv(double s) const {
    const double z = s - s0;
    return d1 + z * (d2 + z * d3 / 2.0);
  }
};

namespace detail {

struct KernelOut {
  double alpha = 0.0;
  Vec3 grad = Vec3::Zero();
  double d2 = 0.0;
  double d3 = 0.0;
  bool degenerate = false;
};

struct Scratch {
  std::vector<Vec3> y;
  std::vector<double> lam;
  std::vector<int> st;
};

inline Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

/// Face-based evaluation. Coordinates are shifted by x_base so the plane
/// passes through s*n.
inline KernelOut truncate_kernel(const Polyhedron& P, const Plane& pl, std::vector<double>* areas) {
  const auto& X = P.vertices();
  const std::size_t nv = X.size();
  const Vec3 n = pl.normal();
  const Vec3 nphi = pl.dn_dphi();
  const Vec3 nth = pl.dn_dtheta();
  const double s = pl.s;
  const double omega = P.volume();
  if (!(omega > 0.0)) throw GeometryError("truncation of a cell with non-positive volume");

  Scratch& sc = scratch();
  sc.y.resize(nv);
  sc.lam.resize(nv);
  sc.st.resize(nv);
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < nv; ++i) {
    sc.y[i] = X[i] - pl.x_base;
    sc.lam[i] = sc.y[i].dot(n) - s;
    sc.st[i] = point_status(sc.lam[i]);
    any_pos |= sc.st[i] > 0;
    any_neg |= sc.st[i] < 0;
  }

  KernelOut out;
  const std::size_t nf = P.faces().size();
  if (areas) areas->assign(nf, 0.0);
  if (!any_pos || !any_neg) {
    for (const auto& loop : P.faces())
      if (std::all_of(loop.begin(), loop.end(), [&](int v) { return sc.st[v] == 0; })) out.degenerate = true;
  }
  if (!any_pos) {
    out.alpha = 1.0;
    if (areas)
      for (std::size_t f = 0; f < nf; ++f) (*areas)[f] = P.face_area(f);
    return out;
  }
  if (!any_neg) return out;

  double V = 0.0, Vs = 0.0, Vphi = 0.0, Vth = 0.0, Vss = 0.0, Vsss = 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& loop = P.faces()[f];
    const std::size_t M = loop.size();
    int smin = 1, smax = -1;
    for (int v : loop) {
      smin = std::min(smin, sc.st[v]);
      smax = std::max(smax, sc.st[v]);
    }
    const Vec3& nf_ = P.face_normal(f);
    const double a = nf_.dot(n);
    const double a_phi = nf_.dot(nphi);
    const double a_th = nf_.dot(nth);
    const double B0 = sc.y[loop[0]].dot(nf_);
    const double B1 = -a;
    const double G = B0 + s * B1;

    double A = 0.0, As = 0.0, Aphi = 0.0, Ath = 0.0, Ass = 0.0;
    if (smax <= 0) {
      A = P.face_area(f);
      if (smin == 0 && smax == 0) out.degenerate = true;
    } else if (smin >= 0) {
      continue;
    } else {
      const double one_m = 1.0 - a * a;
      if (one_m < parallel_tol) {
        out.degenerate = true;
        continue;
      }
      const double c = a * B0;
      const double c_phi = a_phi * B0;
      const double c_th = a_th * B0;
      for (std::size_t m = 0; m < M; ++m) {
        const int u = loop[m];
        const int w = loop[(m + 1) % M];
        const int e = classify_edge(sc.st[u], sc.st[w]);
        if (e == 1 || e == 2) continue;
        const Vec3 E = sc.y[w] - sc.y[u];
        const double L = E.norm();
        double l = L, l_s = 0.0, l_phi = 0.0, l_th = 0.0;
        if (e == 0) {
          const int p = sc.st[u] < 0 ? u : w;
          const int q = sc.st[u] < 0 ? w : u;
          const double lp = sc.lam[p], lq = sc.lam[q];
          const double D = lq - lp;
          l = L * (-lp / D);
          l_s = L / D;
          const double D2 = D * D;
          l_phi = L * (lp * sc.y[q].dot(nphi) - lq * sc.y[p].dot(nphi)) / D2;
          l_th = L * (lp * sc.y[q].dot(nth) - lq * sc.y[p].dot(nth)) / D2;
        }
        const Vec3 N = E.cross(nf_).normalized();
        const double b = -N.dot(n);
        const double b_phi = -N.dot(nphi);
        const double b_th = -N.dot(nth);
        const double C1 = b / one_m;
        const double C0 = sc.y[u].dot(N) - c * C1;
        const double dC1_phi = b_phi / one_m + 2.0 * b * a * a_phi / (one_m * one_m);
        const double dC1_th = b_th / one_m + 2.0 * b * a * a_th / (one_m * one_m);
        const double dC0_phi = -(c_phi * C1 + c * dC1_phi);
        const double dC0_th = -(c_th * C1 + c * dC1_th);
        const double Dm = C0 + s * C1;
        A += Dm * l;
        As += C1 * l + Dm * l_s;
        Aphi += (dC0_phi + s * dC1_phi) * l + Dm * l_phi;
        Ath += (dC0_th + s * dC1_th) * l + Dm * l_th;
        Ass += C1 * l_s;
      }
      A *= 0.5;
      As *= 0.5;
      Aphi *= 0.5;
      Ath *= 0.5;
    }
    if (areas) (*areas)[f] = A;
    V += G * A;
    Vs += B1 * A + G * As;
    Vphi += -s * a_phi * A + G * Aphi;
    Vth += -s * a_th * A + G * Ath;
    Vss += 2.0 * B1 * As + G * Ass;
    Vsss += 3.0 * B1 * Ass;
  }
  const double scale = 1.0 / (3.0 * omega);
  double alpha = V * scale;
  constexpr double range_tol = 1e-9;
  if (alpha < -range_tol || alpha > 1.0 + range_tol || !std::isfinite(alpha))
    throw GeometryError("truncated volume fraction out of range: " + std::to_string(alpha));
  out.alpha = std::clamp(alpha, 0.0, 1.0);
  out.grad = Vec3(Vs, Vphi, Vth) * scale;
  out.d2 = Vss * scale;
  out.d3 = Vsss * scale;
  return out;
}

}  // namespace detail

/// Volume fraction and immersed face areas.
inline TruncationResult truncate(const Polyhedron& cell, const Plane& plane) {
  TruncationResult r;
  const auto k = detail::truncate_kernel(cell, plane, &r.immersed_areas);
  r.alpha = k.alpha;
  r.degenerate = k.degenerate;
  return r;
}

/// Volume fraction only; avoids the area vector.
inline double volume_fraction(const Polyhedron& cell, const Plane& plane) {
  return detail::truncate_kernel(cell, plane, nullptr).alpha;
}

inline TruncationResult truncate_with_gradient(const Polyhedron& cell, const Plane& plane) {
  TruncationResult r;
  const auto k = detail::truncate_kernel(cell, plane, &r.immersed_areas);
  r.alpha = k.alpha;
  r.grad = k.grad;
  r.degenerate = k.degenerate;
  return r;
}

inline CubicModel cubic_model(const Polyhedron& cell, const Plane& plane) {
  const auto k = detail::truncate_kernel(cell, plane, nullptr);
  return {plane.s, k.alpha, k.grad[0], k.d2, k.d3};
}

/// Result of cutting a polyhedron with a halfspace.
struct ClipResult {
  Polyhedron poly;                          // empty when nothing is kept
  std::vector<std::vector<Vec3>> cap;       // loops on the plane, oriented along the kept side's outward normal
  bool empty = false;
};

/// Keeps {lambda <= 0} for side = -1 or {lambda >= 0} for side = +1.
inline ClipResult clip(const Polyhedron& P, const Plane& pl, int side = -1) {
  const auto& X = P.vertices();
  const std::size_t nv = X.size();
  std::vector<double> lam(nv);
  std::vector<int> st(nv);
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < nv; ++i) {
    lam[i] = side < 0 ? pl.level(X[i]) : -pl.level(X[i]);
    st[i] = point_status(lam[i]);
    any_pos |= st[i] > 0;
    any_neg |= st[i] < 0;
  }
  ClipResult r;
  if (!any_pos) {
    r.poly = P;
    return r;
  }
  if (!any_neg) {
    r.empty = true;
    return r;
  }

  std::vector<Vec3> verts;
  std::vector<char> on_plane;
  std::vector<int> new_id(nv, -1);
  for (std::size_t i = 0; i < nv; ++i) {
    if (st[i] <= 0) {
      new_id[i] = static_cast<int>(verts.size());
      verts.push_back(X[i]);
      on_plane.push_back(st[i] == 0);
    }
  }
  std::map<std::pair<int, int>, int> cut_points;
  auto cut = [&](int u, int w) {
    if (u > w) std::swap(u, w);
    auto [it, inserted] = cut_points.try_emplace({u, w}, static_cast<int>(verts.size()));
    if (inserted) {
      const double t = lam[u] / (lam[u] - lam[w]);
      verts.push_back(X[u] + t * (X[w] - X[u]));
      on_plane.push_back(1);
    }
    return it->second;
  };

  std::vector<std::vector<int>> faces;
  std::map<std::pair<int, int>, int> cap_edges;
  for (const auto& loop : P.faces()) {
    std::vector<int> poly;
    const std::size_t M = loop.size();
    for (std::size_t m = 0; m < M; ++m) {
      const int u = loop[m];
      const int w = loop[(m + 1) % M];
      if (st[u] <= 0) poly.push_back(new_id[u]);
      if (st[u] * st[w] == -1) poly.push_back(cut(u, w));
    }
    if (poly.size() < 3) continue;
    for (std::size_t m = 0; m < poly.size(); ++m) {
      const int p = poly[m];
      const int q = poly[(m + 1) % poly.size()];
      if (!on_plane[p] || !on_plane[q]) continue;
      auto rev = cap_edges.find({p, q});
      if (rev != cap_edges.end()) {
        cap_edges.erase(rev);
      } else {
        cap_edges.emplace(std::pair{q, p}, 1);
      }
    }
    faces.push_back(std::move(poly));
  }

  std::multimap<int, int> next;
  for (const auto& [e, _] : cap_edges) next.emplace(e.first, e.second);
  while (!next.empty()) {
    auto it = next.begin();
    const int start = it->first;
    std::vector<int> loop{start};
    int cur = it->second;
    next.erase(it);
    for (std::size_t guard = 0; cur != start && guard < verts.size(); ++guard) {
      loop.push_back(cur);
      auto nx = next.find(cur);
      if (nx == next.end()) break;
      cur = nx->second;
      next.erase(nx);
    }
    if (cur != start || loop.size() < 3) continue;
    std::vector<Vec3> pts;
    for (int v : loop) pts.push_back(verts[v]);
    r.cap.push_back(std::move(pts));
    faces.push_back(std::move(loop));
  }
  r.poly = Polyhedron(std::move(verts), std::move(faces));
  return r;
}

/// Gradient (d/ds, d/dphi, d/dtheta) from the area and centroid of the
/// plane section, by the transport theorem.
struct ReynoldsGradient {
  Vec3 grad = Vec3::Zero();
  double cap_area = 0.0;
  bool empty = false;
};

inline ReynoldsGradient reynolds_gradient(const Polyhedron& P, const Plane& pl) {
  ReynoldsGradient r;
  const ClipResult c = clip(P, pl, -1);
  const Vec3 n = pl.normal();
  double area = 0.0;
  Vec3 moment = Vec3::Zero();
  for (const auto& loop : c.cap) {
    const auto [av, centroid] = polygon_area_centroid(loop);
    const double a = av.dot(n);
    area += a;
    moment += a * centroid;
  }
  if (c.cap.empty() || area <= 0.0) {
    r.empty = true;
    return r;
  }
  const Vec3 xc = moment / area - pl.x_base;
  const double inv = 1.0 / P.volume();
  r.cap_area = area;
  r.grad = Vec3(area * inv, -area * inv * xc.dot(pl.dn_dphi()), -area * inv * xc.dot(pl.dn_dtheta()));
  return r;
}

/// Volume of the cell where the two planes assign different phases.
inline double symmetric_volume_difference(const Polyhedron& P, const Plane& p1, const Plane& p2) {
  auto part = [&](const Plane& below, const Plane& above) {
    const ClipResult c1 = clip(P, below, -1);
    if (c1.empty) return 0.0;
    const ClipResult c2 = clip(c1.poly, above, +1);
    return c2.empty ? 0.0 : std::max(0.0, c2.poly.volume());
  };
  return part(p2, p1) + part(p1, p2);
}

}  // namespace fbnr
