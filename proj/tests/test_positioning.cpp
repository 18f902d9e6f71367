#include "test_util.hpp"

#include <gtest/gtest.h>

#include "oracle/iso_surface_2d.hpp"

using namespace fbnr;
using oracle::iso_surface_2d;
using oracle::iso_surface_2d_dphi;
using testutil::Sampler;

namespace {

const Polyhedron unit_cube = make_box(Vec3::Zero(), Vec3::Ones());

}  // namespace

TEST(Positioning, CenteredCubeHalf) {
  const auto r = position_plane(unit_cube, 0.3, 0.0, 0.5, unit_cube.centroid());
  EXPECT_NEAR(r.s, 0.0, 1e-15);
}

TEST(Positioning, CornerTetrahedronInverse) {
  const Angles a = angles_from_normal(Vec3(1, 1, 1));
  for (double t : {0.2, 0.5, 0.9}) {
    const double target = t * t * t / 6.0;
    const auto r = position_plane(unit_cube, a.phi, a.theta, target, Vec3::Zero());
    EXPECT_NEAR(r.s, t / std::sqrt(3.0), 1e-13);
    EXPECT_NEAR(testutil::oracle_alpha(unit_cube, Plane{a.phi, a.theta, r.s, Vec3::Zero()}), target, 1e-13);
  }
}

TEST(Positioning, TinyTargetOnTetrahedron) {
  Sampler rng(21);
  for (int i = 0; i < 50; ++i) {
    const Polyhedron P = rng.tetrahedron();
    const double phi = rng.uniform(0, 2 * pi), theta = std::acos(rng.uniform(-1, 1));
    const auto r = position_plane(P, phi, theta, default_eps_alpha);
    const Plane pl{phi, theta, r.s, P.centroid()};
    EXPECT_LE(std::abs(volume_fraction(P, pl) - default_eps_alpha), 1e-12);
    const auto br = vertex_brackets(P, pl.normal(), pl.x_base);
    EXPECT_GE(r.s, br.front());
    EXPECT_LT(r.s - br.front(), 0.05 * (br.back() - br.front()));
  }
}

TEST(Positioning, ResidualOnRandomTriples) {
  Sampler rng(22);
  double worst = 0.0;
  int max_trunc = 0;
  for (int i = 0; i < 1000; ++i) {
    const Polyhedron P = rng.any_cell();
    const double phi = rng.uniform(0, 2 * pi), theta = std::acos(rng.uniform(-1, 1));
    double target = rng.uniform(default_eps_alpha, 1.0 - default_eps_alpha);
    if (i % 10 == 0) target = default_eps_alpha;
    if (i % 10 == 1) target = 1.0 - default_eps_alpha;
    const Vec3 xb = P.centroid() + rng.point(0.3);
    const auto r = position_plane(P, phi, theta, target, xb);
    const double res = std::abs(volume_fraction(P, Plane{phi, theta, r.s, xb}) - target);
    worst = std::max(worst, res);
    max_trunc = std::max(max_trunc, r.truncations);
    ASSERT_LE(res, 1e-12) << i;
  }
  RecordProperty("worst", std::to_string(worst));
  RecordProperty("max_truncations", max_trunc);
}

TEST(Positioning, MonotoneInTarget) {
  Sampler rng(23);
  for (int i = 0; i < 200; ++i) {
    const Polyhedron P = rng.any_cell();
    const double phi = rng.uniform(0, 2 * pi), theta = std::acos(rng.uniform(-1, 1));
    double prev = -1e300;
    for (int k = 1; k < 20; ++k) {
      const double s = position_plane(P, phi, theta, k / 20.0).s;
      EXPECT_GT(s, prev);
      prev = s;
    }
  }
}

TEST(Positioning, ContinuousAlongGreatCircle) {
  Sampler rng(24);
  for (int i = 0; i < 20; ++i) {
    const Polyhedron P = rng.any_cell();
    const double target = rng.uniform(0.05, 0.95);
    const Vec3 u = rng.unit();
    const Vec3 v = u.cross(rng.unit()).normalized();
    const int steps = 2000;
    const double dt = 2 * pi / steps;
    double prev = 0.0;
    for (int k = 0; k <= steps; ++k) {
      const Angles a = angles_from_normal(std::cos(k * dt) * u + std::sin(k * dt) * v);
      const double s = position_plane(P, a.phi, a.theta, target).s;
      if (k > 0) {
        EXPECT_LT(std::abs(s - prev), 4.0 * dt);
      }
      prev = s;
    }
  }
}

TEST(Positioning, SingleTruncationInsideTargetBracket) {
  // two distinct distances: a single bracket
  const auto r = position_plane(unit_cube, 0.0, 0.0, 0.37);
  EXPECT_EQ(r.truncations, 1);
  Sampler rng(25);
  int hits = 0;
  for (int i = 0; i < 500; ++i) {
    const Polyhedron P = rng.any_cell();
    const double phi = rng.uniform(0, 2 * pi), theta = std::acos(rng.uniform(-1, 1));
    const double target = rng.uniform(0.01, 0.99);
    const Vec3 n = normal_from_angles(phi, theta);
    const auto br = vertex_brackets(P, n, P.centroid());
    const double s0 = spline_guess(br.front(), br.back(), target);
    const auto rr = position_plane(P, phi, theta, target);
    const auto bracket_of = [&](double s) { return std::upper_bound(br.begin(), br.end(), s) - br.begin(); };
    if (bracket_of(s0) == bracket_of(rr.s)) {
      EXPECT_EQ(rr.truncations, 1);
      ++hits;
    } else {
      EXPECT_GT(rr.truncations, 1);
    }
  }
  EXPECT_GT(hits, 50);
}

TEST(Positioning, SplineGuessEndpoints) {
  EXPECT_NEAR(spline_guess(-1.0, 3.0, 0.0), -1.0, 1e-15);
  EXPECT_NEAR(spline_guess(-1.0, 3.0, 1.0), 3.0, 1e-15);
  EXPECT_NEAR(spline_guess(-1.0, 3.0, 0.5), 1.0, 1e-15);
}

TEST(Positioning, TargetOutsideUnitIntervalThrows) {
  EXPECT_THROW(position_plane(unit_cube, 0.0, 1.0, 1.5), PositioningError);
  EXPECT_THROW(position_plane(unit_cube, 0.0, 1.0, -0.1), PositioningError);
}

TEST(IsoSurface, ExtrudedSquareAnalytic) {
  const Vec3 xb = unit_cube.centroid();
  for (double alpha : {0.6, 0.75, 0.9}) {
    const double junction = std::atan(2.0 * (1.0 - alpha));
    std::vector<double> phis;
    for (int k = 0; k <= 90; ++k) phis.push_back(k * (pi / 2) / 90.0);
    phis.push_back(junction);
    phis.push_back(junction - 1e-6);
    phis.push_back(junction + 1e-6);
    for (double phi : phis) {
      const auto r = position_plane(unit_cube, phi, pi / 2, alpha, xb);
      EXPECT_NEAR(r.s, iso_surface_2d(alpha, phi), 1e-10) << alpha << " " << phi;
    }
    // C1 junction: both branches meet with equal slope
    EXPECT_NEAR(oracle::iso_surface_2d_flat_branch(alpha, junction),
                oracle::iso_surface_2d_corner_branch(alpha, junction), 1e-14);
    EXPECT_NEAR(iso_surface_2d_dphi(alpha, junction - 1e-12), iso_surface_2d_dphi(alpha, junction + 1e-12), 1e-9);
  }
}

TEST(PositionGradient, ExtrudedSquareAnalytic) {
  const Vec3 xb = unit_cube.centroid();
  for (double alpha : {0.6, 0.75, 0.9}) {
    for (int k = 1; k < 45; ++k) {
      const double phi = k * (pi / 2) / 45.0;
      const double junction = std::atan(2.0 * (1.0 - alpha));
      if (std::abs(phi - junction) < 1e-3 || std::abs(phi - (pi / 2 - junction)) < 1e-3) continue;
      const auto r = position_plane(unit_cube, phi, pi / 2, alpha, xb);
      const auto g = position_gradient(unit_cube, Plane{phi, pi / 2, r.s, xb});
      EXPECT_NEAR(g.dphi, iso_surface_2d_dphi(alpha, phi), 1e-10) << alpha << " " << phi;
      EXPECT_NEAR(g.dtheta, 0.0, 1e-12);
    }
  }
}

TEST(PositionGradient, SymmetricCubeIsStationary) {
  const Polyhedron cube = make_box(Vec3::Constant(-1), Vec3::Constant(1));
  const auto g = position_gradient(cube, Plane{0.0, pi / 2, 0.0, Vec3::Zero()});
  EXPECT_NEAR(g.dphi, 0.0, 1e-15);
  EXPECT_NEAR(g.dtheta, 0.0, 1e-15);
}

TEST(PositionGradient, FiniteDifferences) {
  Sampler rng(26);
  int checked = 0;
  while (checked < 300) {
    const Polyhedron P = rng.tetrahedron();
    const double phi = rng.uniform(0, 2 * pi), theta = rng.uniform(0.2, pi - 0.2);
    const double target = rng.uniform(0.05, 0.95);
    const auto r = position_plane(P, phi, theta, target);
    const Plane pl{phi, theta, r.s, P.centroid()};
    if (testutil::vertex_clearance(P, pl) < 1e-5) continue;
    const auto g = position_gradient(P, pl);
    ASSERT_FALSE(g.degenerate);
    const double h = 1e-6;
    const double fphi = (position_plane(P, phi + h, theta, target).s - position_plane(P, phi - h, theta, target).s) / (2 * h);
    const double fth = (position_plane(P, phi, theta + h, target).s - position_plane(P, phi, theta - h, target).s) / (2 * h);
    const double rel = std::hypot(g.dphi - fphi, g.dtheta - fth) / std::max(std::hypot(fphi, fth), 1e-3);
    ASSERT_LE(rel, 1e-5) << checked;
    ++checked;
  }
}
