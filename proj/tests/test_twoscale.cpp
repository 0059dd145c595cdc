#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrlab/homogenize.hpp"
#include "corrlab/lattice_green.hpp"
#include "corrlab/twoscale.hpp"

using namespace corrlab;

namespace {

SolveConfig tight(double tol = 1e-12) {
  SolveConfig c;
  c.tol = tol;
  return c;
}

TwoScaleBundle make_bundle(const Environment& env, double ah, double tol = 1e-12) {
  const CorrectorSet set = solve_correctors(env, 0.0, tight(tol));
  const GreenColumn g0 = green_column(env, 0.0, 0, tight(tol));
  return build_bundle(env, set, g0, ah);
}

const std::vector<double> kXi = {1.0, 0.0, 0.0};

}  // namespace

TEST_CASE("flat coefficients collapse the bundle: R = h = z = 0") {
  auto t = make_torus(3, 6);
  const double c = 1.25;
  const Environment env = sample_environment(t, CoefficientMap::constant(c), 1, 0);
  const TwoScaleBundle b = make_bundle(env, c);
  for (double v : b.h.v) CHECK(v == 0.0);
  for (double v : b.R) CHECK(std::abs(v) < 1e-14);
  double zmax = 0.0;
  for (double v : b.z.v) zmax = std::max(zmax, std::abs(v));
  CHECK(zmax < 1e-9);  // G from CG vs G_h from the exact DFT table
}

TEST_CASE("index convention probe: R_ij(x) reads the flux at x - e_i") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 2, 0);
  const double ah = 0.97;
  const CorrectorSet set = solve_correctors(env, 0.0, tight());
  const GreenColumn g0 = green_column(env, 0.0, 0, tight());
  const TwoScaleBundle b = build_bundle(env, set, g0, ah);
  const int d = 3;
  for (int64_t s : {int64_t(0), int64_t(13), int64_t(37)}) {
    for (int i = 0; i < d; ++i) {
      const int64_t below = t->neighbor(s, i, -1);
      for (int j = 0; j < d; ++j) {
        const int64_t e = t->edge_index(below, i);
        const double flux =
            env.a.v[e] * ((i == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
        const double want = (i == j ? ah : 0.0) - flux;
        CHECK(b.R[(size_t(s) * d + i) * d + j] == doctest::Approx(want).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("torus average of R equals ah Id minus the per-sample flux matrix") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  const Environment env = sample_environment(t, map, 3, 0);
  const double ah = 1.0;
  const CorrectorSet set = solve_correctors(env, 0.0, tight());
  const GreenColumn g0 = green_column(env, 0.0, 0, tight());
  const TwoScaleBundle b = build_bundle(env, set, g0, ah);
  const int d = 3;
  // flux average over all base points, direction pair (i, j)
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double flux = 0.0;
      for (int64_t s = 0; s < t->sites(); ++s) {
        const int64_t e = t->edge_index(s, i);
        flux += env.a.v[e] * ((i == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
      }
      flux /= double(t->sites());
      double ravg = 0.0;
      for (int64_t s = 0; s < t->sites(); ++s) ravg += b.R[(size_t(s) * d + i) * d + j];
      ravg /= double(t->sites());
      CHECK(ravg == doctest::Approx((i == j ? ah : 0.0) - flux).epsilon(1e-12));
    }
}

TEST_CASE("residual identity vanishes to solver tolerance") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  for (uint64_t n = 0; n < 5; ++n) {
    const Environment env = sample_environment(t, map, 4, n);
    const TwoScaleBundle b = make_bundle(env, 1.01);
    const ResidualReport rep = residual_report(b);
    CHECK(rep.max_dev < 1e-8);
    CHECK(std::abs(rep.mean) < 1e-9);  // matched sources: no adjustment constant
  }
}

TEST_CASE("residual degrades proportionally with the solver tolerance") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  const Environment env = sample_environment(t, map, 5, 0);
  const double r_tight = residual_report(make_bundle(env, 1.0, 1e-12)).max_dev;
  const double r_loose = residual_report(make_bundle(env, 1.0, 1e-6)).max_dev;
  CHECK(r_loose > 10.0 * r_tight);
  CHECK(r_loose < 1e-3);  // still follows the 1e-6 tolerance
}

TEST_CASE("representation formula reproduces z up to an additive constant") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  const Environment env = sample_environment(t, map, 6, 0);
  const TwoScaleBundle b = make_bundle(env, 1.0);
  const RepresentationReport rep = representation_z_check(env, b);
  CHECK(rep.max_aligned_dev < 1e-8);
  // dropping the div(h) term breaks the identity by a wide margin
  const RepresentationReport bad = representation_z_check(env, b, /*omit_h=*/true);
  CHECK(bad.max_aligned_dev > 10.0 * 1e-8);
  CHECK(bad.max_aligned_dev > 10.0 * rep.max_aligned_dev);
}

TEST_CASE("vertical corrector derivative: flat map gives zero") {
  auto t = make_torus(3, 6);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 7, 0);
  const double v = vertical_derivative_corrector(env, 0.1, 5, 3, kXi, tight());
  CHECK(v == 0.0);
}

TEST_CASE("vertical corrector derivative matches central differences at order 2") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 8, 0);
  const double mu = 0.1;
  const int64_t x = t->site_at(std::vector<int>{1, 1, 1});
  const int64_t e = t->edge_index(t->site_at(std::vector<int>{2, 2, 2}), 0);
  const double formula = vertical_derivative_corrector(env, mu, e, x, kXi, tight());
  std::vector<double> errs;
  for (int k = 3; k <= 6; ++k) {
    const double h = std::pow(2.0, -k);
    errs.push_back(std::abs(fd_corrector_derivative(env, mu, e, x, kXi, h, tight()) - formula));
  }
  for (size_t i = 0; i + 1 < errs.size(); ++i) {
    const double ratio = errs[i] / errs[i + 1];
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
}

TEST_CASE("vertical corrector derivative has the sign forced by a' > 0") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 9, 0);
  const double mu = 0.1;
  const SolveConfig cfg = tight();
  const int64_t x = t->site_at(std::vector<int>{3, 0, 0});
  for (int64_t e : {t->edge_index(0, 0), t->edge_index(5, 1), t->edge_index(11, 2)}) {
    const GreenColumn gx = green_column(env, mu, x, cfg);
    const ScalarField phi = solve_corrector_direction(env, mu, kXi, cfg);
    const double grad_G = gx.values.v[t->edge_tip(e)] - gx.values.v[t->edge_base(e)];
    const double corrected =
        kXi[t->edge_axis(e)] + phi.v[t->edge_tip(e)] - phi.v[t->edge_base(e)];
    const double v = vertical_derivative_corrector(env, mu, e, x, kXi, cfg);
    if (v != 0.0) CHECK(v * (grad_G * corrected) < 0.0);
  }
}

TEST_CASE("vertical Green derivative: diagonal sign, symmetry, convergence") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 10, 0);
  const double mu = 0.1;
  const int64_t x = t->site_at(std::vector<int>{1, 2, 0});
  const int64_t y = t->site_at(std::vector<int>{3, 1, 1});
  const int64_t e = t->edge_index(t->site_at(std::vector<int>{2, 1, 1}), 1);

  // x = y: a perfect square times -a' <= 0
  CHECK(vertical_derivative_green(env, mu, e, x, x, tight()) <= 0.0);
  // symmetric in (x, y)
  const double vxy = vertical_derivative_green(env, mu, e, x, y, tight());
  const double vyx = vertical_derivative_green(env, mu, e, y, x, tight());
  CHECK(vxy == doctest::Approx(vyx).epsilon(1e-11));
  // second-order finite-difference convergence
  std::vector<double> errs;
  for (int k = 3; k <= 6; ++k) {
    const double h = std::pow(2.0, -k);
    errs.push_back(std::abs(fd_green_derivative(env, mu, e, x, y, h, tight()) - vxy));
  }
  for (size_t i = 0; i + 1 < errs.size(); ++i) {
    const double ratio = errs[i] / errs[i + 1];
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
}

TEST_CASE("vertical derivatives are Cauchy along mu -> 0") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 11, 0);
  const int64_t x = t->site_at(std::vector<int>{2, 1, 0});
  const int64_t e = t->edge_index(t->site_at(std::vector<int>{1, 0, 0}), 0);
  const double v1 = vertical_derivative_corrector(env, 1e-1, e, x, kXi, tight());
  const double v2 = vertical_derivative_corrector(env, 1e-2, e, x, kXi, tight());
  const double v3 = vertical_derivative_corrector(env, 1e-3, e, x, kXi, tight());
  const double v0 = vertical_derivative_corrector(env, 0.0, e, x, kXi, tight());
  CHECK(std::abs(v2 - v3) < std::abs(v1 - v2));
  CHECK(std::abs(v3 - v0) < std::abs(v2 - v3));
}

TEST_CASE("bundle construction validates its inputs") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 12, 0);
  const CorrectorSet set0 = solve_correctors(env, 0.0, tight());
  const GreenColumn g_mass = green_column(env, 0.5, 0, tight());
  CHECK_THROWS_AS(build_bundle(env, set0, g_mass, 1.0), std::invalid_argument);
  const GreenColumn g_off = green_column(env, 0.0, 5, tight());
  CHECK_THROWS_AS(build_bundle(env, set0, g_off, 1.0), std::invalid_argument);
}
