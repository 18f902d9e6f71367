#pragma once

#include "fbnr/reconstruct.hpp"

namespace fbnr {

struct MetricValue {
  double value = 0.0;
  std::size_t cells = 0;       // intersected cells that entered the average
  std::size_t missing = 0;     // intersected cells without a usable result
  std::size_t degenerate = 0;  // included, but ended with status degenerate
};

namespace detail {

inline const ReconstructionResult* usable_result(const std::map<int, ReconstructionResult>& results, int k) {
  const auto it = results.find(k);
  if (it == results.end() || it->second.normal.squaredNorm() == 0.0) return nullptr;
  return &it->second;
}

}  // namespace detail

/// Patch-area weighted mean of |1 - <n_rec, n_ref>| over intersected cells.
inline MetricValue normal_alignment(const Mesh& mesh, const std::map<int, ReconstructionResult>& results,
                                    const VolumeFractionField& field) {
  MetricValue out;
  double num = 0.0, den = 0.0;
  for (int k : interface_cells(field, field.eps_alpha)) {
    const ReconstructionResult* r = detail::usable_result(results, k);
    if (!r) {
      ++out.missing;
      continue;
    }
    const Polyhedron& P = mesh.polyhedron(k);
    const double area = truncate_with_gradient(P, r->plane()).grad[0] * P.volume();
    num += area * std::abs(1.0 - r->normal.dot(field.normal[k]));
    den += area;
    ++out.cells;
    out.degenerate += r->status == ReconStatus::degenerate;
  }
  out.value = den > 0.0 ? num / den : 0.0;
  return out;
}

/// Reference plane of cell k: the reference normal positioned to the data value.
inline Plane reference_plane(const Mesh& mesh, const VolumeFractionField& field, int k, const Vec3& x_base) {
  const Angles a = angles_from_normal(field.normal[k]);
  const double s = position_plane(mesh.polyhedron(k), a.phi, a.theta, field.alpha[k], x_base).s;
  return Plane{a.phi, a.theta, s, x_base};
}

/// Sum of per-cell symmetric differences to the reference planes, divided by the enclosed volume.
inline MetricValue symmetric_volume_error(const Mesh& mesh, const std::map<int, ReconstructionResult>& results,
                                          const VolumeFractionField& field, double enclosed) {
  if (!(enclosed > 0.0)) throw std::invalid_argument("enclosed volume must be positive");
  MetricValue out;
  double sum = 0.0;
  for (int k : interface_cells(field, field.eps_alpha)) {
    const ReconstructionResult* r = detail::usable_result(results, k);
    if (!r) {
      ++out.missing;
      continue;
    }
    const Plane ref = reference_plane(mesh, field, k, r->x_base);
    sum += symmetric_volume_difference(mesh.polyhedron(k), r->plane(), ref);
    ++out.cells;
    out.degenerate += r->status == ReconStatus::degenerate;
  }
  out.value = sum / enclosed;
  return out;
}

/// Negated least-squares slope of log(error) over log(resolution).
inline double convergence_order(const std::vector<double>& resolution, const std::vector<double>& error) {
  if (resolution.size() != error.size() || resolution.size() < 2)
    throw std::invalid_argument("convergence order needs at least two (resolution, error) pairs");
  const std::size_t n = resolution.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(error[i] > 0.0)) throw std::invalid_argument("convergence order needs positive errors");
    if (!(resolution[i] > 0.0) || (i > 0 && !(resolution[i] > resolution[i - 1])))
      throw std::invalid_argument("resolutions must be positive and strictly increasing");
    mx += std::log(resolution[i]);
    my += std::log(error[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(resolution[i]) - mx;
    sxy += dx * (std::log(error[i]) - my);
    sxx += dx * dx;
  }
  return -sxy / sxx;
}

}  // namespace fbnr
