#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/lattice_green.hpp"
#include "corrlab/solver.hpp"
#include "corrlab/stats.hpp"

using namespace corrlab;

namespace {

const SolveConfig kTight = [] {
  SolveConfig c;
  c.tol = 1e-12;
  return c;
}();

ScalarField random_rhs(const TorusPtr& t, uint64_t stream, bool mean_zero) {
  ScalarField f(t);
  for (int64_t s = 0; s < t->sites(); ++s) f.v[s] = counter_normal(909, stream, s);
  if (mean_zero) f.subtract_mean();
  return f;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_CASE("CG matches the dense LU oracle (flat coefficients, point source)") {
  auto t = make_torus(3, 4);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 1, 0);
  ScalarField f(t);
  f.v[0] = 1.0;
  const ScalarField u = solve(env, 1.0, f, kTight);
  const ScalarField v = dense_oracle_solve(env, 1.0, f);
  CHECK(max_abs_diff(u, v) < 1e-10);
}

TEST_CASE("CG matches the dense LU oracle on 20 random environments") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  double worst = 0.0;
  for (uint64_t n = 0; n < 20; ++n) {
    const Environment env = sample_environment(t, map, 2, n);
    const double mu = (n % 3 == 0) ? 0.0 : ((n % 3 == 1) ? 0.3 : 1.0);
    const ScalarField f = random_rhs(t, n, mu == 0.0);
    const ScalarField u = solve(env, mu, f, kTight);
    const ScalarField v = dense_oracle_solve(env, mu, f);
    worst = std::max(worst, max_abs_diff(u, v));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("zero right-hand side gives the zero solution") {
  auto t = make_torus(3, 4);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 3, 0);
  ScalarField f(t);
  const ScalarField u = solve(env, 0.5, f, kTight);
  for (double v : u.v) CHECK(v == 0.0);
}

TEST_CASE("mu = 0 rejects sources with non-vanishing mean") {
  auto t = make_torus(3, 4);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 4, 0);
  ScalarField f(t);
  for (auto& v : f.v) v = 0.25;
  CHECK_THROWS_AS(solve(env, 0.0, f, kTight), std::invalid_argument);
  CHECK_THROWS_AS(dense_oracle_solve(env, 0.0, f), std::invalid_argument);
}

TEST_CASE("non-convergence raises a failure carrying the residual history") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 5, 0);
  const ScalarField f = random_rhs(t, 1, true);
  SolveConfig bad;
  bad.tol = 1e-12;
  bad.max_iter = 2;
  try {
    solve(env, 0.0, f, bad);
    FAIL("expected SolveFailure");
  } catch (const SolveFailure& e) {
    CHECK(e.stats.history.size() >= 2);
  }
}

TEST_CASE("the dense oracle refuses oversized instances") {
  auto t = make_torus(3, 32);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 6, 0);
  ScalarField f(t);
  CHECK_THROWS_AS(dense_oracle_solve(env, 1.0, f), std::invalid_argument);
}

TEST_CASE("dense operator matrix: symmetry and stencil row sums") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 7, 0);
  const auto M = dense_operator_matrix(env, 1.0);
  const int64_t n = t->sites();
  for (int64_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      CHECK(M[i * n + j] == M[j * n + i]);
      row += M[i * n + j];
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));  // row sum = mu
  }
}

TEST_CASE("correctors vanish for constant coefficients") {
  auto t = make_torus(3, 6);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.3), 8, 0);
  const CorrectorSet set = solve_correctors(env, 0.0, kTight);
  for (int j = 0; j < 3; ++j)
    for (double v : set.phi[j].v) CHECK(v == 0.0);
}

TEST_CASE("correctors match the dense oracle at mu = 0.1") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 9, 0);
  const CorrectorSet set = solve_correctors(env, 0.1, kTight);
  for (int j = 0; j < 3; ++j) {
    EdgeField flux(t);
    for (int64_t s = 0; s < t->sites(); ++s)
      flux.v[s * 3 + j] = env.a.v[s * 3 + j];
    ScalarField rhs = divergence(flux);
    for (double& x : rhs.v) x = -x;
    const ScalarField oracle = dense_oracle_solve(env, 0.1, rhs);
    CHECK(max_abs_diff(set.phi[j], oracle) < 1e-9);
  }
}

TEST_CASE("corrector set invariants: equation residual, zero mean, periodicity") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  const Environment env = sample_environment(t, map, 10, 0);
  const CorrectorSet set = solve_correctors(env, 0.0, kTight);
  const int d = 3;
  for (int j = 0; j < d; ++j) {
    // mu phi + div A(e_j + grad phi) = 0 up to solver tolerance
    EdgeField flux(t);
    for (int64_t e = 0; e < t->edges(); ++e)
      flux.v[e] = env.a.v[e] * ((t->edge_axis(e) == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
    const ScalarField res = divergence(flux);
    double rmax = 0.0;
    for (double v : res.v) rmax = std::max(rmax, std::abs(v));
    CHECK(rmax < 1e-10);
    // exact zero torus mean (projection)
    CHECK(std::abs(set.phi[j].mean()) < 1e-14);
    // per-direction gradient sums vanish by periodicity
    for (int axis = 0; axis < d; ++axis) {
      double total = 0.0;
      for (int64_t s = 0; s < t->sites(); ++s)
        total += set.grad_phi[j].v[t->edge_index(s, axis)];
      CHECK(std::abs(total) < 1e-10);
    }
  }
}

TEST_CASE("mean corrector gradient vanishes over the ensemble") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const int64_t N = 200;
  std::vector<double> grad_mean(N);
  for (int64_t n = 0; n < N; ++n) {
    const Environment env = sample_environment(t, map, 11, uint64_t(n));
    const CorrectorSet set = solve_correctors(env, 0.0, kTight);
    grad_mean[n] = set.grad_phi[0].v[t->edge_index(0, 0)];
  }
  const MeanErr me = mean_stderr(grad_mean);
  CHECK(std::abs(me.mean) < 3.0 * me.stderr_);
}

TEST_CASE("flat-coefficient Green value matches the infinite-lattice quadrature") {
  // a == 1, mu = 0, large torus: G(0,0) ~ 0.2527 within 2 percent
  auto t = make_torus(3, 96);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 12, 0);
  SolveConfig cfg;
  cfg.tol = 1e-10;
  const GreenColumn g = green_column(env, 0.0, 0, cfg);
  const std::vector<double> A = {1.0, 1.0, 1.0};
  const std::vector<int> origin = {0, 0, 0};
  const double ref = lattice_green_inf(A, origin).value;  // 0.2527310...
  CHECK(ref == doctest::Approx(0.2527310098).epsilon(1e-8));
  CHECK(std::abs(g.values.v[0] - ref) / ref < 0.02);
  CHECK(std::abs(g.values.mean()) < 1e-13);  // exact zero-mean normalization
}

TEST_CASE("Green columns are symmetric across source exchange") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 13, 0);
  const int64_t x0 = 0;
  const int64_t y0 = t->site_at(std::vector<int>{3, 2, 1});
  const GreenColumn gx = green_column(env, 0.0, x0, kTight);
  const GreenColumn gy = green_column(env, 0.0, y0, kTight);
  CHECK(std::abs(gx.values.v[y0] - gy.values.v[x0]) < 1e-8);
  // and with mass
  const GreenColumn mx = green_column(env, 0.25, x0, kTight);
  const GreenColumn my = green_column(env, 0.25, y0, kTight);
  CHECK(std::abs(mx.values.v[y0] - my.values.v[x0]) < 1e-10);
}

TEST_CASE("massive Green function decays exponentially") {
  auto t = make_torus(3, 32);
  const Environment env = sample_environment(t, CoefficientMap::constant(1.0), 14, 0);
  SolveConfig cfg;
  cfg.tol = 1e-12;
  const GreenColumn g = green_column(env, 0.25, 0, cfg);
  std::vector<double> xs, ys;
  for (int axis = 0; axis < 3; ++axis)
    for (int sign = -1; sign <= 1; sign += 2)
      for (int n = 4; n <= 8; ++n) {
        std::vector<int> xc(3, 0);
        xc[axis] = sign * n;
        const double v = g.values.v[t->site_at(xc)];
        REQUIRE(v > 0.0);
        xs.push_back(n);
        ys.push_back(std::log(v));
      }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double n = double(xs.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ym = sy / n;
  for (size_t i = 0; i < xs.size(); ++i) {
    ss_res += std::pow(ys[i] - icpt - slope * xs[i], 2);
    ss_tot += std::pow(ys[i] - ym, 2);
  }
  CHECK(slope < 0.0);
  CHECK(1.0 - ss_res / ss_tot > 0.99);
}

TEST_CASE("corrector gradient moments are stable in the mass parameter") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const int64_t N = 40;
  std::vector<double> m2(3, 0.0), m4(3, 0.0);
  const std::vector<double> mus = {0.0, 1e-2, 1e-1};
  for (size_t mi = 0; mi < mus.size(); ++mi) {
    for (int64_t n = 0; n < N; ++n) {
      const Environment env = sample_environment(t, map, 15, uint64_t(n));
      const ScalarField phi = solve_corrector_direction(env, mus[mi], xi, kTight);
      const EdgeField g = gradient(phi);
      for (int64_t s = 0; s < t->sites(); ++s) {
        const double v = g.v[t->edge_index(s, 0)];
        m2[mi] += v * v;
        m4[mi] += v * v * v * v;
      }
    }
    m2[mi] /= double(N * t->sites());
    m4[mi] /= double(N * t->sites());
  }
  for (size_t mi = 1; mi < mus.size(); ++mi) {
    CHECK(std::abs(m2[mi] / m2[0] - 1.0) < 0.2);
    CHECK(std::abs(m4[mi] / m4[0] - 1.0) < 0.2);
  }
}
