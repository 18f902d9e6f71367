#pragma once

#include "fbnr/truncation.hpp"

namespace fbnr {

class PositioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PositionResult {
  double s = 0.0;
  int truncations = 0;
};

/// Sorted distinct projected vertex distances <x_i - x_base, n>; values
/// closer than zero_tol are merged.
inline std::vector<double> vertex_brackets(const Polyhedron& P, const Vec3& n, const Vec3& x_base) {
  std::vector<double> d;
  d.reserve(P.vertices().size());
  for (const auto& x : P.vertices()) d.push_back((x - x_base).dot(n));
  std::sort(d.begin(), d.end());
  std::vector<double> out;
  for (double v : d)
    if (out.empty() || v - out.back() >= zero_tol) out.push_back(v);
  return out;
}

/// Closed-form initial guess from the extreme projected distances.
inline double spline_guess(double s_min, double s_max, double alpha) {
  const double t = 0.5 - std::cos((std::acos(2.0 * alpha - 1.0) - 2.0 * pi) / 3.0);
  return s_min + (s_max - s_min) * t;
}

namespace detail {

/// Root of the increasing cubic model minus target on [lo, hi].
inline double cubic_root(const CubicModel& S, double target, double lo, double hi, double start) {
  if (S.eval(lo) - target >= 0.0) return lo;
  if (S.eval(hi) - target <= 0.0) return hi;
  double z = std::clamp(start, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = S.eval(z) - target;
    if (std::abs(f) <= 1e-14) {
      // one more Newton step; costs nothing and removes the residual's
      // amplification by small slopes
      const double df = S.deriv(z);
      const double zn = df > 0.0 ? z - f / df : z;
      return zn >= lo && zn <= hi ? zn : z;
    }
    if (f < 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    const double df = S.deriv(z);
    double zn = df > 0.0 ? z - f / df : lo - 1.0;
    if (!(zn > lo && zn < hi)) zn = 0.5 * (lo + hi);
    if (zn == z || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)))
      return zn;
    z = zn;
  }
  return z;
}

}  // namespace detail

/// Signed distance s* such that the plane (phi, theta, s*, x_base) truncates
/// the target volume fraction.
inline PositionResult position_plane(const Polyhedron& P, double phi, double theta, double alpha_target,
                                     const Vec3& x_base) {
  if (!(alpha_target >= 0.0 && alpha_target <= 1.0))
    throw PositioningError("target volume fraction outside [0,1]");
  const Vec3 n = normal_from_angles(phi, theta);
  const std::vector<double> br = vertex_brackets(P, n, x_base);
  PositionResult r;
  if (alpha_target == 0.0) {
    r.s = br.front();
    return r;
  }
  if (alpha_target == 1.0) {
    r.s = br.back();
    return r;
  }
  // Global bracket of admissible distances and its alpha values.
  double lo = br.front(), hi = br.back();
  double s = spline_guess(lo, hi, alpha_target);
  constexpr int max_truncations = 50;
  while (r.truncations < max_truncations) {
    s = std::clamp(s, lo, hi);
    auto it = std::upper_bound(br.begin(), br.end(), s);
    std::size_t j = it == br.begin() ? 0 : static_cast<std::size_t>(it - br.begin()) - 1;
    if (j + 1 >= br.size()) j = br.size() - 2;
    const double bl = br[j], bh = br[j + 1];
    const double w = bh - bl;
    if (s - bl < 1e-3 * w || bh - s < 1e-3 * w) s = 0.5 * (bl + bh);

    const CubicModel S = cubic_model(P, Plane{phi, theta, s, x_base});
    ++r.truncations;
    const double al = j == 0 ? 0.0 : S.eval(bl);
    const double ah = j + 2 == br.size() ? 1.0 : S.eval(bh);
    if (al <= alpha_target && alpha_target <= ah) {
      r.s = detail::cubic_root(S, alpha_target, bl, bh, s);
      return r;
    }
    if (ah < alpha_target) {
      lo = std::max(lo, bh);
    } else {
      hi = std::min(hi, bl);
    }
    // Locally quadratic step; root nearest s inside (lo, hi), else bisect.
    const double a2 = 0.5 * S.d2, a1 = S.d1, a0 = S.value - alpha_target;
    double next = 0.5 * (lo + hi);
    std::vector<double> roots;
    if (std::abs(a2) > 1e-300) {
      const double disc = a1 * a1 - 4.0 * a2 * a0;
      if (disc >= 0.0) {
        const double q = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
        if (q != 0.0) roots.push_back(s + q / a2);
        if (q != 0.0) roots.push_back(s + a0 / q);
      }
    } else if (a1 > 0.0) {
      roots.push_back(s - a0 / a1);
    }
    double best = std::numeric_limits<double>::infinity();
    for (double z : roots) {
      if (z > lo && z < hi && std::abs(z - s) < best) {
        best = std::abs(z - s);
        next = z;
      }
    }
    s = next;
  }
  throw PositioningError("positioning did not converge");
}

inline PositionResult position_plane(const Polyhedron& P, double phi, double theta, double alpha_target) {
  return position_plane(P, phi, theta, alpha_target, P.centroid());
}

struct PositionGradient {
  double dphi = 0.0;
  double dtheta = 0.0;
  double ds_alpha = 0.0;  // d alpha / ds at s*
  bool degenerate = false;
};

/// Derivatives of s*(phi, theta) at a positioned plane, from the implicit
/// function theorem applied to alpha(s*, phi, theta) = const.
inline PositionGradient position_gradient(const Polyhedron& P, const Plane& plane) {
  const TruncationResult t = truncate_with_gradient(P, plane);
  PositionGradient g;
  g.ds_alpha = t.grad[0];
  if (!(t.grad[0] > 0.0)) {
    g.degenerate = true;
    return g;
  }
  g.dphi = -t.grad[1] / t.grad[0];
  g.dtheta = -t.grad[2] / t.grad[0];
  g.degenerate = t.degenerate;
  return g;
}

}  // namespace fbnr
