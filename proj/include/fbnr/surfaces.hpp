#pragma once

#include "fbnr/mesh.hpp"
#include "fbnr/parallel.hpp"
#include "fbnr/truncation.hpp"

#include <cstdint>
#include <variant>

namespace fbnr {

/// splitmix64 generator. Uniform doubles are ((x >> 11) + 0.5) * 2^-53,
/// which lie strictly inside (0, 1).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Index of Y_lm in a coefficient vector ordered by l, then m = -l..l.
inline constexpr std::size_t sh_index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }

/// Real (tesseral) spherical harmonics, orthonormal on the unit sphere,
/// without the Condon-Shortley phase:
///   Y_l0 = P_l0(cos theta), Y_lm = sqrt2 P_lm cos(m phi), Y_l,-m = sqrt2 P_lm sin(m phi)
/// with P_lm the fully normalized associated Legendre functions.
struct SphericalHarmonics {
  std::vector<double> value;
  std::vector<double> dphi;
  std::vector<double> dtheta;
};

inline SphericalHarmonics eval_spherical_harmonics(int L, double phi, double theta) {
  const double x = std::cos(theta), sn = std::sin(theta);
  // Normalized Legendre table P[l][m] for m = 0..l+1 (the extra column feeds the derivative).
  std::vector<std::vector<double>> P(L + 1, std::vector<double>(L + 2, 0.0));
  P[0][0] = std::sqrt(1.0 / (4.0 * pi));
  for (int m = 1; m <= L; ++m) P[m][m] = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sn * P[m - 1][m - 1];
  for (int m = 0; m < L; ++m) P[m + 1][m] = std::sqrt(2.0 * m + 3.0) * x * P[m][m];
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m) /
                                 (4.0 * (l - 1) * (l - 1) - 1.0));
      P[l][m] = a * (x * P[l - 1][m] - b * P[l - 2][m]);
    }
  }
  auto dP = [&](int l, int m) {
    if (m == 0) return l == 0 ? 0.0 : -std::sqrt(static_cast<double>(l) * (l + 1)) * P[l][1];
    const double up = m + 1 <= l ? std::sqrt(static_cast<double>(l - m) * (l + m + 1)) * P[l][m + 1] : 0.0;
    const double down = std::sqrt(static_cast<double>(l + m) * (l - m + 1)) * P[l][m - 1];
    return 0.5 * (down - up);
  };

  SphericalHarmonics Y;
  const std::size_t count = static_cast<std::size_t>((L + 1) * (L + 1));
  Y.value.assign(count, 0.0);
  Y.dphi.assign(count, 0.0);
  Y.dtheta.assign(count, 0.0);
  const double r2 = std::sqrt(2.0);
  for (int l = 0; l <= L; ++l) {
    Y.value[sh_index(l, 0)] = P[l][0];
    Y.dtheta[sh_index(l, 0)] = dP(l, 0);
    for (int m = 1; m <= l; ++m) {
      const double c = std::cos(m * phi), s = std::sin(m * phi);
      Y.value[sh_index(l, m)] = r2 * P[l][m] * c;
      Y.value[sh_index(l, -m)] = r2 * P[l][m] * s;
      Y.dtheta[sh_index(l, m)] = r2 * dP(l, m) * c;
      Y.dtheta[sh_index(l, -m)] = r2 * dP(l, m) * s;
      Y.dphi[sh_index(l, m)] = -m * Y.value[sh_index(l, -m)];
      Y.dphi[sh_index(l, -m)] = m * Y.value[sh_index(l, m)];
    }
  }
  return Y;
}

/// Coefficients of R^3 = sum c_lm Y_lm for a randomly perturbed sphere.
/// Draw order: for l = 1..L, m = -l..l, first gamma1 then gamma2.
inline std::vector<double> perturbed_sphere_coeffs(double R0, int L, double sigma0, std::uint64_t seed) {
  if (L < 0 || sigma0 < 0.0) throw std::invalid_argument("perturbed sphere needs L >= 0 and sigma0 >= 0");
  std::vector<double> c(static_cast<std::size_t>((L + 1) * (L + 1)), 0.0);
  c[0] = std::sqrt(4.0 * pi) * R0 * R0 * R0;
  SplitMix64 rng(seed);
  for (int l = 1; l <= L; ++l)
    for (int m = -l; m <= l; ++m) {
      const double g1 = rng.uniform();
      const double g2 = rng.uniform();
      c[sh_index(l, m)] = std::sqrt(sigma0) * std::sqrt(-2.0 * std::log(g1)) * std::cos(2.0 * pi * g2);
    }
  return c;
}

struct Halfspace {
  Vec3 x_ref = Vec3::Zero();
  Vec3 n_ref = Vec3::UnitZ();
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.8;
};

struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Constant(0.8);
};

struct PerturbedSphere {
  Vec3 center = Vec3::Zero();
  double R0 = 0.8;
  int L = 0;
  std::vector<double> coeffs;  // sized (L+1)^2
};

using Hypersurface = std::variant<Halfspace, Sphere, Ellipsoid, PerturbedSphere>;

inline PerturbedSphere make_perturbed_sphere(const Vec3& center, double R0, int L, double sigma0,
                                             std::uint64_t seed) {
  return {center, R0, L, perturbed_sphere_coeffs(R0, L, sigma0, seed)};
}

namespace detail {

/// Radius, dR/dphi, dR/dtheta of a perturbed sphere in direction (phi, theta).
inline std::array<double, 3> perturbed_radius(const PerturbedSphere& p, double phi, double theta) {
  const auto Y = eval_spherical_harmonics(p.L, phi, theta);
  double F = 0.0, Fp = 0.0, Ft = 0.0;
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
    F += p.coeffs[i] * Y.value[i];
    Fp += p.coeffs[i] * Y.dphi[i];
    Ft += p.coeffs[i] * Y.dtheta[i];
  }
  if (!(F > 0.0)) throw GeometryError("perturbed sphere with non-positive R^3");
  const double R = std::cbrt(F);
  const double k = 1.0 / (3.0 * R * R);
  return {R, k * Fp, k * Ft};
}

}  // namespace detail

/// Signed level set, negative inside.
inline double level_set(const Hypersurface& surf, const Vec3& x) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          return (x - s.x_ref).dot(s.n_ref);
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return (x - s.center).norm() - s.radius;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          return s.semi_axes.minCoeff() * ((x - s.center).cwiseQuotient(s.semi_axes).norm() - 1.0);
        } else {
          const Vec3 d = x - s.center;
          const double r = d.norm();
          // at the center every direction gives -R(dir); take the pole
          const Angles a = r == 0.0 ? Angles{0.0, 0.0} : angles_from_normal(d);
          return r - detail::perturbed_radius(s, a.phi, a.theta)[0];
        }
      },
      surf);
}

inline Vec3 level_set_gradient(const Hypersurface& surf, const Vec3& x) {
  return std::visit(
      [&](const auto& s) -> Vec3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          return s.n_ref;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return (x - s.center).normalized();
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          const Vec3 q = (x - s.center).cwiseQuotient(s.semi_axes);
          return s.semi_axes.minCoeff() * q.cwiseQuotient(s.semi_axes) / q.norm();
        } else {
          const Vec3 d = x - s.center;
          const double r = d.norm();
          // at the center every direction gives -R(dir); take the pole
          const Angles a = r == 0.0 ? Angles{0.0, 0.0} : angles_from_normal(d);
          const auto R = detail::perturbed_radius(s, a.phi, a.theta);
          const Vec3 e_r = d / r;
          const Vec3 e_t = dnormal_dtheta(a.phi, a.theta);
          const Vec3 e_p(-std::sin(a.phi), std::cos(a.phi), 0.0);
          const double st = std::sin(a.theta);
          Vec3 g = e_r - (R[2] / r) * e_t;
          if (st > 1e-12) g -= (R[1] / (r * st)) * e_p;
          return g;
        }
      },
      surf);
}

inline Vec3 exact_normal(const Hypersurface& surf, const Vec3& x) { return level_set_gradient(surf, x).normalized(); }

/// Volume of the enclosed region.
inline double enclosed_volume(const Hypersurface& surf) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          throw std::invalid_argument("a halfspace encloses no finite volume");
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return 4.0 * pi * s.radius * s.radius * s.radius / 3.0;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          return 4.0 * pi * s.semi_axes.prod() / 3.0;
        } else {
          return s.coeffs[0] * std::sqrt(4.0 * pi) / 3.0;
        }
      },
      surf);
}

/// Upper bound for |grad lambda|, used to prove a region free of the surface.
inline double lipschitz_bound(const Hypersurface& surf) {
  if (std::holds_alternative<PerturbedSphere>(surf)) return 2.0;
  return 1.0;
}

/// Closest surface point by Newton projection along the level-set gradient.
inline Vec3 project_to_surface(const Hypersurface& surf, Vec3 x) {
  for (int it = 0; it < 100; ++it) {
    const double l = level_set(surf, x);
    if (std::abs(l) < 1e-14) break;
    const Vec3 g = level_set_gradient(surf, x);
    x -= l * g / g.squaredNorm();
  }
  return x;
}

struct VolumeFractionField {
  std::vector<double> alpha;
  std::vector<Vec3> normal;  // reference normal, zero on bulk cells
  double eps_alpha = default_eps_alpha;
};

inline bool is_intersected(double alpha, double eps_alpha = default_eps_alpha) {
  return alpha >= eps_alpha && alpha <= 1.0 - eps_alpha;
}

inline std::vector<int> interface_cells(const VolumeFractionField& field, double eps_alpha = default_eps_alpha) {
  std::vector<int> out;
  for (std::size_t k = 0; k < field.alpha.size(); ++k)
    if (is_intersected(field.alpha[k], eps_alpha)) out.push_back(static_cast<int>(k));
  return out;
}

namespace detail {

using Tet = std::array<Vec3, 4>;

/// Volume below lambda of a tetrahedron, by red refinement down to depth
/// and an affine cut of the finest tetrahedra.
inline double tet_inside_volume(const Hypersurface& surf, const Tet& t, const std::array<double, 4>& lam, int depth,
                                double lip) {
  const double vol = std::abs((t[1] - t[0]).cross(t[2] - t[0]).dot(t[3] - t[0])) / 6.0;
  double diam = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) diam = std::max(diam, (t[i] - t[j]).norm());
  const double lmin = *std::min_element(lam.begin(), lam.end());
  const double lmax = *std::max_element(lam.begin(), lam.end());
  if (lmin > lip * diam) return 0.0;
  if (lmax < -lip * diam) return vol;
  if (depth == 0) {
    if (lmin >= 0.0) return 0.0;
    if (lmax <= 0.0) return vol;
    // affine interpolant: lambda(x) = lam0 + g.(x - t0)
    Mat3 E;
    E.row(0) = t[1] - t[0];
    E.row(1) = t[2] - t[0];
    E.row(2) = t[3] - t[0];
    const Vec3 g = E.partialPivLu().solve(Vec3(lam[1] - lam[0], lam[2] - lam[0], lam[3] - lam[0]));
    const double gn = g.norm();
    const Plane pl = Plane::from_normal(g / gn, -lam[0] / gn, t[0]);
    return vol * volume_fraction(make_tetrahedron(t[0], t[1], t[2], t[3]), pl);
  }
  // edge midpoints
  const Vec3 m01 = 0.5 * (t[0] + t[1]), m02 = 0.5 * (t[0] + t[2]), m03 = 0.5 * (t[0] + t[3]);
  const Vec3 m12 = 0.5 * (t[1] + t[2]), m13 = 0.5 * (t[1] + t[3]), m23 = 0.5 * (t[2] + t[3]);
  const double l01 = level_set(surf, m01), l02 = level_set(surf, m02), l03 = level_set(surf, m03);
  const double l12 = level_set(surf, m12), l13 = level_set(surf, m13), l23 = level_set(surf, m23);
  double v = 0.0;
  v += tet_inside_volume(surf, {t[0], m01, m02, m03}, {lam[0], l01, l02, l03}, depth - 1, lip);
  v += tet_inside_volume(surf, {m01, t[1], m12, m13}, {l01, lam[1], l12, l13}, depth - 1, lip);
  v += tet_inside_volume(surf, {m02, m12, t[2], m23}, {l02, l12, lam[2], l23}, depth - 1, lip);
  v += tet_inside_volume(surf, {m03, m13, m23, t[3]}, {l03, l13, l23, lam[3]}, depth - 1, lip);
  // inner octahedron split along the m02-m13 diagonal
  v += tet_inside_volume(surf, {m01, m02, m03, m13}, {l01, l02, l03, l13}, depth - 1, lip);
  v += tet_inside_volume(surf, {m01, m02, m12, m13}, {l01, l02, l12, l13}, depth - 1, lip);
  v += tet_inside_volume(surf, {m02, m03, m13, m23}, {l02, l03, l13, l23}, depth - 1, lip);
  v += tet_inside_volume(surf, {m02, m12, m13, m23}, {l02, l12, l13, l23}, depth - 1, lip);
  return v;
}

inline double cell_inside_fraction(const Polyhedron& P, const Hypersurface& surf, int depth) {
  if (const auto* h = std::get_if<Halfspace>(&surf))
    return volume_fraction(P, Plane::from_normal(h->n_ref, 0.0, h->x_ref));
  const double lip = lipschitz_bound(surf);
  const double diam = P.diameter();
  std::vector<double> lam;
  lam.reserve(P.vertices().size());
  for (const auto& x : P.vertices()) lam.push_back(level_set(surf, x));
  const double lmin = *std::min_element(lam.begin(), lam.end());
  const double lmax = *std::max_element(lam.begin(), lam.end());
  if (lmin > lip * diam) return 0.0;
  if (lmax < -lip * diam) return 1.0;
  // fan decomposition: cell centroid with each face triangle fan
  const Vec3 c = P.centroid();
  const double lc = level_set(surf, c);
  double inside = 0.0;
  for (const auto& loop : P.faces()) {
    for (std::size_t m = 1; m + 1 < loop.size(); ++m) {
      const int a = loop[0], b = loop[m], d = loop[m + 1];
      inside += tet_inside_volume(surf, {c, P.vertices()[a], P.vertices()[b], P.vertices()[d]},
                                  {lc, lam[a], lam[b], lam[d]}, depth, lip);
    }
  }
  return std::clamp(inside / P.volume(), 0.0, 1.0);
}

}  // namespace detail

/// Volume fractions of the region {lambda <= 0} and reference normals on
/// intersected cells. Halfspaces are cut exactly.
inline VolumeFractionField init_volume_fractions(const Mesh& mesh, const Hypersurface& surf, int depth = 3,
                                                 double eps_alpha = default_eps_alpha) {
  if (depth < 0) throw std::invalid_argument("subdivision depth must be >= 0");
  VolumeFractionField field;
  field.eps_alpha = eps_alpha;
  field.alpha.assign(mesh.num_cells(), 0.0);
  field.normal.assign(mesh.num_cells(), Vec3::Zero());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const Polyhedron& P = mesh.polyhedron(static_cast<int>(k));
    field.alpha[k] = detail::cell_inside_fraction(P, surf, depth);
    if (is_intersected(field.alpha[k], eps_alpha))
      field.normal[k] = exact_normal(surf, project_to_surface(surf, P.centroid()));
  });
  return field;
}

}  // namespace fbnr
