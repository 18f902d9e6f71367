#pragma once

#include "fbnr/mesh.hpp"
#include "fbnr/surfaces.hpp"

#include <stdexcept>
#include <string>

namespace fbnr {

/// Reconstruction schemes. The last three are the gradient baselines.
enum class Scheme { fbnr, lse, lse_star, gg };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::fbnr: return "fbnr";
    case Scheme::lse: return "lse";
    case Scheme::lse_star: return "lse-star";
    case Scheme::gg: return "gg";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "fbnr") return Scheme::fbnr;
  if (s == "lse") return Scheme::lse;
  if (s == "lse-star") return Scheme::lse_star;
  if (s == "gg") return Scheme::gg;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected fbnr, lse, lse-star or gg)");
}

/// Thrown when a stencil carries no usable orientation (uniform data).
struct UnreconstructableStencil : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GradientEstimate {
  Vec3 gradient = Vec3::Zero();  // volume fraction per length
  Scheme method = Scheme::lse_star;
  bool singular = false;
  double det_A = 0.0;        // LSE only
  bool partial_coverage = false;  // GG only: some node has incident cells outside the stencil
};

/// Least-squares gradient from centroid differences. With use_bulk false
/// (LSE*) data-wise bulk members get zero weight.
inline GradientEstimate lse_gradient(const Mesh& mesh, const Stencil& st, const VolumeFractionField& field,
                                     bool use_bulk) {
  GradientEstimate out;
  out.method = use_bulk ? Scheme::lse : Scheme::lse_star;
  const int c0 = st.center;
  const Vec3 x0 = mesh.cells()[c0].centroid;
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  int usable = 0;
  for (int k : st.members) {
    if (k == c0) continue;
    if (!use_bulk && !is_intersected(field.alpha[k], field.eps_alpha)) continue;
    const Vec3 dx = mesh.cells()[k].centroid - x0;
    A += dx * dx.transpose();
    b += (field.alpha[k] - field.alpha[c0]) * dx;
    ++usable;
  }
  out.det_A = A.determinant();
  const double scale = A.norm();
  if (usable < 3 || scale == 0.0 || std::abs(out.det_A) < 1e-16 * scale * scale * scale) {
    out.singular = true;
    return out;
  }
  out.gradient = A.ldlt().solve(b);
  return out;
}

/// Gauss-Green gradient with node averages taken over stencil cells.
inline GradientEstimate gauss_green_gradient(const Mesh& mesh, const Stencil& st, const VolumeFractionField& field) {
  GradientEstimate out;
  out.method = Scheme::gg;
  const Cell& cell = mesh.cells()[st.center];
  std::vector<int> sorted = st.members;
  std::sort(sorted.begin(), sorted.end());
  auto in_stencil = [&](int c) { return std::binary_search(sorted.begin(), sorted.end(), c); };
  Vec3 g = Vec3::Zero();
  for (const auto& r : cell.face_refs) {
    const Face& f = mesh.faces()[r.face];
    double face_avg = 0.0;
    for (int v : f.vertex_indices) {
      double sum = 0.0;
      int count = 0;
      for (int c : mesh.vertex_cells(v)) {
        if (in_stencil(c)) {
          sum += field.alpha[c];
          ++count;
        } else {
          out.partial_coverage = true;
        }
      }
      face_avg += sum / count;  // the center cell always contains v
    }
    face_avg /= static_cast<double>(f.vertex_indices.size());
    g += r.omega * f.area * face_avg * f.unit_normal;
  }
  out.gradient = g / cell.volume;
  return out;
}

struct OrientationFix {
  Vec3 normal = Vec3::Zero();
  bool uniform = false;  // all values equal: nothing to orient against
};

namespace detail {

/// Lowest and highest data value members, ties broken by lowest cell id.
inline std::pair<int, int> extreme_members(const Stencil& st, const VolumeFractionField& field) {
  int lo = -1, hi = -1;
  for (int k : st.members) {
    if (lo < 0 || field.alpha[k] < field.alpha[lo] || (field.alpha[k] == field.alpha[lo] && k < lo)) lo = k;
    if (hi < 0 || field.alpha[k] > field.alpha[hi] || (field.alpha[k] == field.alpha[hi] && k < hi)) hi = k;
  }
  return {lo, hi};
}

}  // namespace detail

/// Orients a normal estimate so that it points from the highest to the
/// lowest data value, i.e. out of the reference phase.
inline OrientationFix orientation_fix(const Vec3& n_est, const Mesh& mesh, const Stencil& st,
                                      const VolumeFractionField& field) {
  const auto [lo, hi] = detail::extreme_members(st, field);
  if (field.alpha[lo] == field.alpha[hi]) return {n_est, true};
  const Vec3 d = mesh.cells()[lo].centroid - mesh.cells()[hi].centroid;
  return {n_est.dot(d) < 0.0 ? Vec3(-n_est) : n_est, false};
}

inline GradientEstimate estimate_gradient(const Mesh& mesh, const Stencil& st, const VolumeFractionField& field,
                                          Scheme scheme) {
  switch (scheme) {
    case Scheme::lse: return lse_gradient(mesh, st, field, true);
    case Scheme::gg: return gauss_green_gradient(mesh, st, field);
    default: return lse_gradient(mesh, st, field, false);
  }
}

/// Initial plane orientation n = -g/|g| after the orientation fix. FBNR
/// starts from LSE*.
inline Angles initial_orientation(const Mesh& mesh, const Stencil& st, const VolumeFractionField& field,
                                  Scheme scheme) {
  const GradientEstimate g = estimate_gradient(mesh, st, field, scheme);
  Vec3 n;
  if (!g.singular && g.gradient.norm() > 0.0) {
    n = -g.gradient.normalized();
  } else {
    const auto [lo, hi] = detail::extreme_members(st, field);
    if (field.alpha[lo] == field.alpha[hi])
      throw UnreconstructableStencil("uniform volume fractions around cell " + std::to_string(st.center));
    n = (mesh.cells()[lo].centroid - mesh.cells()[hi].centroid).normalized();
  }
  const OrientationFix fixed = orientation_fix(n, mesh, st, field);
  if (fixed.uniform)
    throw UnreconstructableStencil("uniform volume fractions around cell " + std::to_string(st.center));
  return angles_from_normal(fixed.normal);
}

}  // namespace fbnr
