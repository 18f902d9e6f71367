#pragma once

#include "fbnr/initguess.hpp"
#include "fbnr/parallel.hpp"
#include "fbnr/positioning.hpp"

#include <map>

namespace fbnr {

struct ReconConfig {
  double grad_tol = 1e-4;  // relative to |grad E| at the initial guess
  int max_iters = 20;
  int line_search_max = 6;
  double box_theta = pi / 4;
  int box_exponent = 12;
  double bulk_weight = 1e9;  // only applied on face stencils
  double eps_alpha = default_eps_alpha;
  StencilKind stencil_kind = StencilKind::vertex;
  bool extend_stencil = true;
};

enum class StepKind { initial, gauss_newton, steepest_descent };
enum class ReconStatus { converged, max_iters, degenerate };

inline const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::initial: return "initial";
    case StepKind::gauss_newton: return "gauss-newton";
    case StepKind::steepest_descent: return "steepest-descent";
  }
  return "?";
}

inline const char* to_string(ReconStatus s) {
  switch (s) {
    case ReconStatus::converged: return "converged";
    case ReconStatus::max_iters: return "max_iters";
    case ReconStatus::degenerate: return "degenerate";
  }
  return "?";
}

struct TraceEntry {
  Angles p;
  double error = 0.0;
  double grad_norm = 0.0;
  StepKind step = StepKind::initial;
};

struct ReconstructionResult {
  Angles p;
  double s = 0.0;
  Vec3 normal = Vec3::Zero();
  double error = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  ReconStatus status = ReconStatus::degenerate;
  Vec3 x_base = Vec3::Zero();
  std::size_t stencil_size = 0;
  bool extended = false;

  Plane plane() const { return Plane{p.phi, p.theta, s, x_base}; }
};

/// Stencil plus per-member weights; the center carries the volume constraint.
struct StencilProblem {
  const Mesh* mesh = nullptr;
  const VolumeFractionField* field = nullptr;
  Stencil stencil;
  std::vector<double> weights;  // parallel to stencil.members, 0 for the center
  Vec3 x_base = Vec3::Zero();

  const Polyhedron& center_cell() const { return mesh->polyhedron(stencil.center); }
  double target() const { return field->alpha[stencil.center]; }
};

inline std::vector<double> assign_weights(const Stencil& st, const VolumeFractionField& field,
                                          const ReconConfig& cfg) {
  std::vector<double> mu(st.members.size(), 1.0);
  for (std::size_t i = 0; i < st.members.size(); ++i) {
    const int k = st.members[i];
    if (k == st.center)
      mu[i] = 0.0;
    else if (st.kind == StencilKind::face && !is_intersected(field.alpha[k], cfg.eps_alpha))
      mu[i] = cfg.bulk_weight;
  }
  return mu;
}

struct ExtendedStencil {
  Stencil stencil;
  bool extended = false;
  bool no_bulk_found = false;
};

/// Appends the neighborhood of the first member (by label) whose own
/// neighborhood holds a data-wise bulk cell, unless a bulk cell is already present.
inline ExtendedStencil extend_stencil(const Mesh& mesh, const Stencil& st, const VolumeFractionField& field,
                                      double eps_alpha = default_eps_alpha) {
  ExtendedStencil out{st, false, false};
  auto bulk = [&](int k) { return !is_intersected(field.alpha[k], eps_alpha); };
  if (std::any_of(st.members.begin(), st.members.end(), bulk)) return out;
  std::vector<int> by_label = st.members;
  std::sort(by_label.begin(), by_label.end());
  for (int u : by_label) {
    const Stencil nu = mesh.neighborhood(u, st.kind);
    if (std::none_of(nu.members.begin(), nu.members.end(), bulk)) continue;
    std::vector<int> rest(st.members.begin() + 1, st.members.end());
    for (int k : nu.members)
      if (k != st.center && std::find(rest.begin(), rest.end(), k) == rest.end()) rest.push_back(k);
    std::sort(rest.begin(), rest.end());
    out.stencil.members.assign(1, st.center);
    out.stencil.members.insert(out.stencil.members.end(), rest.begin(), rest.end());
    out.extended = true;
    return out;
  }
  out.no_bulk_found = true;
  return out;
}

inline StencilProblem make_problem(const Mesh& mesh, const VolumeFractionField& field, int center,
                                   const ReconConfig& cfg, bool* extended = nullptr) {
  StencilProblem pb;
  pb.mesh = &mesh;
  pb.field = &field;
  pb.stencil = mesh.neighborhood(center, cfg.stencil_kind);
  if (cfg.extend_stencil) {
    auto ext = extend_stencil(mesh, pb.stencil, field, cfg.eps_alpha);
    pb.stencil = std::move(ext.stencil);
    if (extended) *extended = ext.extended;
  }
  pb.weights = assign_weights(pb.stencil, field, cfg);
  pb.x_base = mesh.cells()[center].centroid;
  return pb;
}

struct ErrorValue {
  double E = 0.0;
  double s = 0.0;
};

/// E(p) = 1/2 sum mu_k (alpha_k(p, s*(p)) - alpha_hat_k)^2 with s* from the center constraint.
inline ErrorValue error_value(const StencilProblem& pb, const Angles& p) {
  const double s = position_plane(pb.center_cell(), p.phi, p.theta, pb.target(), pb.x_base).s;
  const Plane pl{p.phi, p.theta, s, pb.x_base};
  double E = 0.0;
  for (std::size_t i = 0; i < pb.stencil.members.size(); ++i) {
    if (pb.weights[i] == 0.0) continue;
    const int k = pb.stencil.members[i];
    const double r = volume_fraction(pb.mesh->polyhedron(k), pl) - pb.field->alpha[k];
    E += 0.5 * pb.weights[i] * r * r;
  }
  return {E, s};
}

struct ErrorGradient {
  double E = 0.0;
  double s = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 H = Mat2::Zero();  // Gauss-Newton approximation
  bool degenerate = false;
};

inline ErrorGradient error_gradient(const StencilProblem& pb, const Angles& p) {
  ErrorGradient out;
  out.s = position_plane(pb.center_cell(), p.phi, p.theta, pb.target(), pb.x_base).s;
  const Plane pl{p.phi, p.theta, out.s, pb.x_base};
  const PositionGradient ds = position_gradient(pb.center_cell(), pl);
  out.degenerate = ds.degenerate;
  for (std::size_t i = 0; i < pb.stencil.members.size(); ++i) {
    if (pb.weights[i] == 0.0) continue;
    const int k = pb.stencil.members[i];
    const TruncationResult t = truncate_with_gradient(pb.mesh->polyhedron(k), pl);
    const double r = t.alpha - pb.field->alpha[k];
    const Vec2 g(t.grad[1] + t.grad[0] * ds.dphi, t.grad[2] + t.grad[0] * ds.dtheta);
    out.E += 0.5 * pb.weights[i] * r * r;
    out.grad += pb.weights[i] * r * g;
    out.H += pb.weights[i] * g * g.transpose();
  }
  return out;
}

/// Full phi edge length of the reachable box at polar angle theta.
inline double box_phi_width(double theta, double box_theta = pi / 4, int exponent = 12) {
  const double q = (2.0 * theta - pi) / (pi - box_theta);
  return std::min(2.0 * pi, box_theta + (pi - box_theta) * std::pow(q, exponent));
}

/// Scales dp uniformly so that p + dp stays inside the box of half-widths
/// (box_phi_width / 2, box_theta / 2) around p.
inline Vec2 clip_step(const Angles& p, const Vec2& dp, double box_theta = pi / 4, int exponent = 12) {
  const double hphi = 0.5 * box_phi_width(p.theta, box_theta, exponent);
  const double hth = 0.5 * box_theta;
  double t = 1.0;
  if (std::abs(dp[0]) > hphi) t = std::min(t, hphi / std::abs(dp[0]));
  if (std::abs(dp[1]) > hth) t = std::min(t, hth / std::abs(dp[1]));
  return t * dp;
}

namespace detail {

inline Angles step_to(const Angles& p, const Vec2& dp) { return {p.phi + dp[0], p.theta + dp[1]}; }

}  // namespace detail

/// Damped, box-clipped Gauss-Newton minimization of E(p) from p0.
inline ReconstructionResult minimize_from(const StencilProblem& pb, const Angles& p0, const ReconConfig& cfg) {
  ReconstructionResult res;
  res.x_base = pb.x_base;
  res.stencil_size = pb.stencil.members.size();
  Angles p = p0;
  ErrorGradient eg = error_gradient(pb, p);
  res.trace.push_back({p, eg.E, eg.grad.norm(), StepKind::initial});
  res.status = ReconStatus::max_iters;
  const double stop = cfg.grad_tol * eg.E;
  for (;;) {
    if (eg.grad.norm() < stop) {
      res.status = ReconStatus::converged;
      break;
    }
    if (eg.degenerate) {
      res.status = ReconStatus::degenerate;
      break;
    }
    if (res.iterations >= cfg.max_iters) break;

    auto line_search = [&](const Vec2& dir, Angles& accepted) {
      const Vec2 dp = clip_step(p, dir, cfg.box_theta, cfg.box_exponent);
      double t = 1.0;
      for (int i = 0; i < cfg.line_search_max; ++i, t *= 0.5) {
        const Angles trial = detail::step_to(p, t * dp);
        if (error_value(pb, trial).E < eg.E) {
          accepted = trial;
          return true;
        }
      }
      return false;
    };

    Angles next;
    StepKind kind = StepKind::gauss_newton;
    const double hn = eg.H.norm();
    bool ok = false;
    if (std::abs(eg.H.determinant()) >= 1e-14 * hn * hn) ok = line_search(eg.H.ldlt().solve(-eg.grad), next);
    if (!ok) {
      kind = StepKind::steepest_descent;
      ok = line_search(-eg.grad, next);
    }
    if (!ok) {
      // no descent left: a stationary point unless the gradient is still large
      res.status = eg.grad.norm() < cfg.grad_tol ? ReconStatus::converged : ReconStatus::degenerate;
      break;
    }
    p = wrap_angles(next.phi, next.theta);
    eg = error_gradient(pb, p);
    ++res.iterations;
    res.trace.push_back({p, eg.E, eg.grad.norm(), kind});
  }
  res.p = p;
  res.s = eg.s;
  res.normal = normal_from_angles(p.phi, p.theta);
  res.error = eg.E;
  res.grad_norm = eg.grad.norm();
  return res;
}

inline ReconstructionResult reconstruct_cell(const Mesh& mesh, int center, const VolumeFractionField& field,
                                             const ReconConfig& cfg = {}) {
  bool extended = false;
  const StencilProblem pb = make_problem(mesh, field, center, cfg, &extended);
  const Angles p0 = initial_orientation(mesh, pb.stencil, field, Scheme::lse_star);
  ReconstructionResult r = minimize_from(pb, p0, cfg);
  r.extended = extended;
  return r;
}

/// Baseline reconstruction: the gradient estimate alone, positioned to the center value.
inline ReconstructionResult reconstruct_baseline(const Mesh& mesh, int center, const VolumeFractionField& field,
                                                 Scheme scheme, const ReconConfig& cfg = {}) {
  ReconConfig plain = cfg;
  plain.extend_stencil = false;
  const StencilProblem pb = make_problem(mesh, field, center, plain);
  ReconstructionResult r;
  r.p = initial_orientation(mesh, pb.stencil, field, scheme);
  const ErrorValue ev = error_value(pb, r.p);
  r.s = ev.s;
  r.error = ev.E;
  r.x_base = pb.x_base;
  r.normal = normal_from_angles(r.p.phi, r.p.theta);
  r.stencil_size = pb.stencil.members.size();
  r.status = ReconStatus::converged;
  r.trace.push_back({r.p, r.error, 0.0, StepKind::initial});
  return r;
}

/// Reconstructs every intersected cell. Results are independent of the
/// thread schedule; per-cell failures are recorded as degenerate.
inline std::map<int, ReconstructionResult> reconstruct_field(const Mesh& mesh, const VolumeFractionField& field,
                                                             const ReconConfig& cfg = {},
                                                             Scheme scheme = Scheme::fbnr) {
  const std::vector<int> cells = interface_cells(field, cfg.eps_alpha);
  std::vector<ReconstructionResult> out(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    try {
      out[i] = scheme == Scheme::fbnr ? reconstruct_cell(mesh, cells[i], field, cfg)
                                      : reconstruct_baseline(mesh, cells[i], field, scheme, cfg);
    } catch (const std::runtime_error&) {
      out[i] = ReconstructionResult{};
      out[i].x_base = mesh.cells()[cells[i]].centroid;
      out[i].status = ReconStatus::degenerate;
    }
  });
  std::map<int, ReconstructionResult> m;
  for (std::size_t i = 0; i < cells.size(); ++i) m.emplace(cells[i], std::move(out[i]));
  return m;
}

}  // namespace fbnr
