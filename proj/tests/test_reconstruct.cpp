#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace fbnr;

namespace {

const Vec3 n_ref = Vec3(1, -3, 6).normalized();
const Vec3 x_ref(0.4534, 0.5442, 0.4330);

int cube_id(int N, int i, int j, int k) { return i + N * (j + N * k); }

VolumeFractionField constant_field(const Mesh& m, double a) {
  VolumeFractionField f;
  f.alpha.assign(m.num_cells(), a);
  f.normal.assign(m.num_cells(), Vec3::Zero());
  return f;
}

}  // namespace

TEST(Weights, BulkWeightOnlyOnFaceStencils) {
  const Mesh m = generate_cuboid_mesh(5);
  VolumeFractionField f = constant_field(m, 0.5);
  const int c = cube_id(5, 2, 2, 2), bulk = cube_id(5, 2, 2, 3);
  f.alpha[bulk] = 1.0;
  ReconConfig cfg;
  for (StencilKind kind : {StencilKind::face, StencilKind::vertex}) {
    const Stencil st = m.neighborhood(c, kind);
    const auto mu = assign_weights(st, f, cfg);
    for (std::size_t i = 0; i < st.members.size(); ++i) {
      if (st.members[i] == c)
        EXPECT_EQ(mu[i], 0.0);
      else if (st.members[i] == bulk)
        EXPECT_EQ(mu[i], kind == StencilKind::face ? 1e9 : 1.0);
      else
        EXPECT_EQ(mu[i], 1.0);
    }
  }
}

TEST(ExtendStencil, Cases) {
  const int N = 7;
  const Mesh m = generate_cuboid_mesh(N);
  const int c = cube_id(N, 3, 3, 3);
  const Stencil st = m.neighborhood(c, StencilKind::face);

  VolumeFractionField f = constant_field(m, 0.5);
  auto none = extend_stencil(m, st, f);
  EXPECT_FALSE(none.extended);
  EXPECT_TRUE(none.no_bulk_found);
  EXPECT_EQ(none.stencil.members, st.members);

  f.alpha[cube_id(N, 5, 3, 3)] = 0.0;  // one ring beyond the member (4,3,3)
  auto ext = extend_stencil(m, st, f);
  EXPECT_TRUE(ext.extended);
  auto& mem = ext.stencil.members;
  EXPECT_EQ(mem.front(), c);
  EXPECT_NE(std::find(mem.begin(), mem.end(), cube_id(N, 5, 3, 3)), mem.end());
  EXPECT_EQ(mem.size(), 7u + 5u);  // neighborhood of (4,3,3) minus the two shared cells
  EXPECT_TRUE(std::is_sorted(mem.begin() + 1, mem.end()));

  f.alpha[cube_id(N, 3, 3, 4)] = 1.0;  // now a member itself is bulk
  auto same = extend_stencil(m, st, f);
  EXPECT_FALSE(same.extended);
  EXPECT_EQ(same.stencil.members, st.members);
}

TEST(ErrorValue, HalfspaceMinimumAndLinearity) {
  const Mesh m = generate_cuboid_mesh(5);
  const auto f = init_volume_fractions(m, Halfspace{x_ref, n_ref});
  const Angles pref = angles_from_normal(n_ref);
  ReconConfig cfg;
  for (int c : interface_cells(f)) {
    StencilProblem pb = make_problem(m, f, c, cfg);
    EXPECT_LE(error_value(pb, pref).E, 1e-20);
    const Angles p{pref.phi + 0.3, pref.theta - 0.1};
    const double E = error_value(pb, p).E;
    for (double& w : pb.weights) w *= 2.0;
    EXPECT_NEAR(error_value(pb, p).E, 2.0 * E, 1e-15 * E);
  }
}

TEST(ErrorValue, BulkMatchingNeighborsGiveZero) {
  const Mesh m = generate_cuboid_mesh(5);
  // z = 0.1 lies inside the middle layer: the neighbors above and below are bulk
  const auto f = init_volume_fractions(m, Halfspace{Vec3(0, 0, 0.1), Vec3::UnitZ()});
  ReconConfig cfg;
  cfg.stencil_kind = StencilKind::face;
  const StencilProblem pb = make_problem(m, f, cube_id(5, 2, 2, 2), cfg);
  EXPECT_LE(error_value(pb, Angles{0.0, 0.0}).E, 1e-30);
}

TEST(ErrorGradient, HalfspaceStationaryAndPsd) {
  const Mesh m = generate_cuboid_mesh(5);
  const auto f = init_volume_fractions(m, Halfspace{x_ref, n_ref});
  const Angles pref = angles_from_normal(n_ref);
  for (int c : interface_cells(f)) {
    const auto eg = error_gradient(make_problem(m, f, c, ReconConfig{}), pref);
    EXPECT_LE(eg.grad.norm(), 1e-10);
    EXPECT_EQ(eg.H(0, 1), eg.H(1, 0));
    Eigen::SelfAdjointEigenSolver<Mat2> es(eg.H);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * eg.H.trace());
  }
}

TEST(ErrorGradient, MatchesFiniteDifferences) {
  const Mesh m = load_vtk(std::string(FBNR_DATA_DIR) + "/meshes/tet_N05.vtk");
  const auto f = init_volume_fractions(m, Sphere{Vec3(0.05, -0.1, 0.02), 0.8});
  testutil::Sampler rng(41);
  const auto cells = interface_cells(f);
  int checked = 0, attempts = 0;
  while (checked < 100 && attempts < 5000) {
    ++attempts;
    const int c = cells[rng.integer(0, static_cast<int>(cells.size()) - 1)];
    ReconConfig cfg;
    cfg.stencil_kind = StencilKind::edge;
    const StencilProblem pb = make_problem(m, f, c, cfg);
    const Angles p{rng.uniform(0, 2 * pi), rng.uniform(0.2, pi - 0.2)};
    const auto eg = error_gradient(pb, p);
    if (eg.degenerate) continue;
    // stay away from planes touching vertices of any stencil cell
    const Plane pl{p.phi, p.theta, eg.s, pb.x_base};
    double clearance = 1e300;
    for (int k : pb.stencil.members) clearance = std::min(clearance, testutil::vertex_clearance(m.polyhedron(k), pl));
    if (clearance < 1e-4) continue;
    const double h = 1e-6;
    const Vec2 fd((error_value(pb, {p.phi + h, p.theta}).E - error_value(pb, {p.phi - h, p.theta}).E) / (2 * h),
                  (error_value(pb, {p.phi, p.theta + h}).E - error_value(pb, {p.phi, p.theta - h}).E) / (2 * h));
    if (fd.norm() < 1e-6) continue;
    ASSERT_LE((eg.grad - fd).norm() / fd.norm(), 1e-4) << "cell " << c;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(ClipStep, BoxWidths) {
  EXPECT_NEAR(box_phi_width(pi / 2), pi / 4, 1e-15);
  EXPECT_EQ(box_phi_width(0.0), 2 * pi);
  EXPECT_EQ(box_phi_width(pi), 2 * pi);
  const Vec2 small(0.1, -0.2);
  EXPECT_EQ(clip_step({1.0, pi / 2}, small), small);
}

TEST(ClipStep, ContainmentAndDirection) {
  testutil::Sampler rng(42);
  for (int i = 0; i < 100000; ++i) {
    const Angles p{rng.uniform(0, 2 * pi), rng.uniform(0, pi)};
    const Vec2 dp(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const Vec2 c = clip_step(p, dp);
    ASSERT_LE(std::abs(c[0]), 0.5 * box_phi_width(p.theta) * (1 + 1e-15));
    ASSERT_LE(std::abs(c[1]), pi / 8 * (1 + 1e-15));
    ASSERT_NEAR(c[0] * dp[1] - c[1] * dp[0], 0.0, 1e-12 * dp.squaredNorm());
    ASSERT_GE(c.dot(dp), 0.0);
  }
}

TEST(WrapAngles, NormalInvariant) {
  testutil::Sampler rng(43);
  for (int i = 0; i < 10000; ++i) {
    const double phi = rng.uniform(-20, 20), theta = rng.uniform(-20, 20);
    const Angles w = wrap_angles(phi, theta);
    ASSERT_GE(w.phi, 0.0);
    ASSERT_LT(w.phi, 2 * pi);
    ASSERT_GE(w.theta, 0.0);
    ASSERT_LE(w.theta, pi);
    ASSERT_LE((normal_from_angles(w.phi, w.theta) - normal_from_angles(phi, theta)).norm(), 1e-14);
  }
}

TEST(ReconstructCell, HalfspaceOnCubes) {
  for (int N : {5, 10}) {
    const Mesh m = generate_cuboid_mesh(N);
    const auto f = init_volume_fractions(m, Halfspace{x_ref, n_ref});
    for (int c : interface_cells(f)) {
      const auto r = reconstruct_cell(m, c, f);
      EXPECT_EQ(r.status, ReconStatus::converged);
      EXPECT_LE(r.error, 1e-12) << c;
      EXPECT_LE(1.0 - r.normal.dot(n_ref), 1e-6) << c;
      EXPECT_LE(std::abs(volume_fraction(m.polyhedron(c), r.plane()) - f.alpha[c]), 1e-12);
      for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LT(r.trace[i].error, r.trace[i - 1].error);
    }
  }
}

TEST(ReconstructCell, TraceConservesCenterVolume) {
  const Mesh m = load_vtk(std::string(FBNR_DATA_DIR) + "/meshes/tet_N05.vtk");
  const auto f = init_volume_fractions(m, Sphere{Vec3::Zero(), 0.8});
  ReconConfig cfg;
  cfg.stencil_kind = StencilKind::face;
  const auto cells = interface_cells(f);
  for (std::size_t i = 0; i < cells.size(); i += 5) {
    const auto r = reconstruct_cell(m, cells[i], f, cfg);
    const Polyhedron& P = m.polyhedron(cells[i]);
    for (const auto& t : r.trace) {
      const double s = position_plane(P, t.p.phi, t.p.theta, f.alpha[cells[i]], r.x_base).s;
      EXPECT_LE(std::abs(volume_fraction(P, Plane{t.p.phi, t.p.theta, s, r.x_base}) - f.alpha[cells[i]]), 1e-12);
    }
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LT(r.trace[k].error, r.trace[k - 1].error);
  }
}

TEST(ReconstructCell, UniqueAttractorFromTwoStarts) {
  const Mesh m = generate_cuboid_mesh(30);
  const auto f = init_volume_fractions(m, Sphere{Vec3::Zero(), 0.8});
  ReconConfig cfg;
  int compared = 0;
  for (int c : interface_cells(f)) {
    if (f.alpha[c] < 0.3 || f.alpha[c] > 0.7 || compared >= 20) continue;
    const auto a = reconstruct_cell(m, c, f, cfg);
    const StencilProblem pb = make_problem(m, f, c, cfg);
    const Angles start{a.p.phi + 0.15, a.p.theta - 0.1};
    const auto b = minimize_from(pb, start, cfg);
    ASSERT_EQ(a.status, ReconStatus::converged);
    ASSERT_EQ(b.status, ReconStatus::converged);
    EXPECT_LE((a.normal - b.normal).norm(), 1e-5) << c;
    ++compared;
  }
  EXPECT_EQ(compared, 20);
}

TEST(ReconstructCell, PenaltyBoundsError) {
  const Mesh m = load_vtk(std::string(FBNR_DATA_DIR) + "/meshes/tet_N05.vtk");
  const auto f = init_volume_fractions(m, Sphere{Vec3::Zero(), 0.8});
  ReconConfig cfg;
  cfg.stencil_kind = StencilKind::face;
  testutil::Sampler rng(44);
  int checked = 0;
  for (int c : interface_cells(f)) {
    const StencilProblem pb = make_problem(m, f, c, cfg);
    for (std::size_t i = 0; i < pb.stencil.members.size(); ++i) {
      const int k = pb.stencil.members[i];
      if (k == c || is_intersected(f.alpha[k])) continue;
      const Angles p{rng.uniform(0, 2 * pi), rng.uniform(0, pi)};
      const auto ev = error_value(pb, p);
      const double d = std::abs(volume_fraction(m.polyhedron(k), Plane{p.phi, p.theta, ev.s, pb.x_base}) - f.alpha[k]);
      EXPECT_GE(ev.E, 0.5 * 1e9 * d * d * (1 - 1e-12));
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(ReconstructField, EmptyDeterministicAndNoDegenerate) {
  const Mesh m = generate_cuboid_mesh(30);
  EXPECT_TRUE(reconstruct_field(m, constant_field(m, 1.0)).empty());
  const auto f = init_volume_fractions(m, Sphere{Vec3::Zero(), 0.8});
  const auto r1 = reconstruct_field(m, f);
  const auto r2 = reconstruct_field(m, f);
  ASSERT_EQ(r1.size(), interface_cells(f).size());
  int degenerate = 0;
  for (const auto& [c, r] : r1) {
    const auto& q = r2.at(c);
    EXPECT_EQ(r.p.phi, q.p.phi);
    EXPECT_EQ(r.p.theta, q.p.theta);
    EXPECT_EQ(r.s, q.s);
    degenerate += r.status == ReconStatus::degenerate;
  }
  EXPECT_EQ(degenerate, 0);
}

TEST(ReconstructBaseline, HalfspaceCloseOnInteriorStencils) {
  const Mesh m = generate_cuboid_mesh(10);
  const auto f = init_volume_fractions(m, Halfspace{x_ref, n_ref});
  for (Scheme s : {Scheme::lse, Scheme::lse_star, Scheme::gg}) {
    const auto res = reconstruct_field(m, f, ReconConfig{}, s);
    for (const auto& [c, r] : res) {
      EXPECT_EQ(r.iterations, 0);
      EXPECT_LE(std::abs(volume_fraction(m.polyhedron(c), r.plane()) - f.alpha[c]), 1e-12);
      // one-sided boundary stencils bias the gradient estimates
      if (r.stencil_size == 27) {
        EXPECT_LT(1.0 - r.normal.dot(n_ref), 0.05);
      }
    }
  }
}
