#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/lattice.hpp"
#include "corrlab/solver.hpp"

using namespace corrlab;

namespace {

ScalarField random_scalar(const TorusPtr& t, uint64_t stream) {
  ScalarField f(t);
  for (int64_t s = 0; s < t->sites(); ++s) f.v[s] = counter_normal(31337, stream, s);
  return f;
}

EdgeField random_edges(const TorusPtr& t, uint64_t stream) {
  EdgeField f(t);
  for (int64_t e = 0; e < t->edges(); ++e) f.v[e] = counter_normal(31337, stream, e);
  return f;
}

// independent index-arithmetic oracle: explicit coordinate loops
double gradient_oracle(const ScalarField& f, int x0, int x1, int x2, int axis) {
  const int L = f.torus->side();
  auto idx = [&](int a, int b, int c) {
    a = ((a % L) + L) % L;
    b = ((b % L) + L) % L;
    c = ((c % L) + L) % L;
    return int64_t(a) + int64_t(L) * b + int64_t(L) * L * c;
  };
  const int dx = axis == 0, dy = axis == 1, dz = axis == 2;
  return f.v[idx(x0 + dx, x1 + dy, x2 + dz)] - f.v[idx(x0, x1, x2)];
}

}  // namespace

TEST_CASE("gradient of a constant field vanishes exactly") {
  auto t = make_torus(3, 4);
  ScalarField f(t);
  for (auto& v : f.v) v = 2.75;
  const EdgeField g = gradient(f);
  for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("gradient of an indicator is +-1 on incident edges") {
  auto t = make_torus(3, 4);
  ScalarField f(t);
  f.v[0] = 1.0;
  const EdgeField g = gradient(f);
  int plus = 0, minus = 0, zero = 0;
  for (int64_t e = 0; e < t->edges(); ++e) {
    if (g.v[e] == 1.0) {
      ++plus;
      CHECK(t->edge_tip(e) == 0);  // edges entering 0
    } else if (g.v[e] == -1.0) {
      ++minus;
      CHECK(t->edge_base(e) == 0);  // edges leaving 0
    } else {
      CHECK(g.v[e] == 0.0);
      ++zero;
    }
  }
  CHECK(plus == 3);
  CHECK(minus == 3);
  CHECK(zero == t->edges() - 6);
}

TEST_CASE("gradient matches the coordinate-loop oracle") {
  auto t = make_torus(3, 4);
  const ScalarField f = random_scalar(t, 1);
  const EdgeField g = gradient(f);
  for (int x0 = 0; x0 < 4; ++x0)
    for (int x1 = 0; x1 < 4; ++x1)
      for (int x2 = 0; x2 < 4; ++x2)
        for (int axis = 0; axis < 3; ++axis) {
          const int64_t site = t->site_at(std::vector<int>{x0, x1, x2});
          CHECK(g.v[t->edge_index(site, axis)] ==
                doctest::Approx(gradient_oracle(f, x0, x1, x2, axis)).epsilon(1e-15));
        }
}

TEST_CASE("divergence of the zero field is zero") {
  auto t = make_torus(3, 4);
  EdgeField F(t);
  const ScalarField out = divergence(F);
  for (double v : out.v) CHECK(v == 0.0);
}

TEST_CASE("divergence is the adjoint of the gradient") {
  for (int L : {3, 4, 5}) {
    auto t = make_torus(3, L);
    const EdgeField F = random_edges(t, 2);
    const ScalarField g = random_scalar(t, 3);
    const double lhs = dot(divergence(F), g);
    const double rhs = dot_edges(F, gradient(g));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
  auto t2 = make_torus(2, 6);
  const EdgeField F = random_edges(t2, 4);
  const ScalarField g = random_scalar(t2, 5);
  CHECK(std::abs(dot(divergence(F), g) - dot_edges(F, gradient(g))) < 1e-10);
}

TEST_CASE("divergence of grad(indicator) is the Laplacian stencil") {
  auto t = make_torus(3, 4);
  ScalarField f(t);
  f.v[0] = 1.0;
  const ScalarField lap = divergence(gradient(f));
  CHECK(lap.v[0] == 6.0);
  for (int axis = 0; axis < 3; ++axis) {
    CHECK(lap.v[t->neighbor(0, axis, +1)] == -1.0);
    CHECK(lap.v[t->neighbor(0, axis, -1)] == -1.0);
  }
}

TEST_CASE("apply_elliptic reproduces the Laplacian for unit conductances") {
  auto t = make_torus(3, 4);
  EdgeField a(t);
  for (auto& v : a.v) v = 1.0;
  ScalarField u(t);
  u.v[0] = 1.0;
  const ScalarField out = apply_elliptic(0.0, a, u);
  CHECK(out.v[0] == 6.0);
  CHECK(out.v[t->neighbor(0, 0, +1)] == -1.0);
}

TEST_CASE("mass term adds mu*u entrywise") {
  auto t = make_torus(3, 4);
  EdgeField a(t);
  for (auto& v : a.v) v = 1.0;
  const ScalarField u = random_scalar(t, 6);
  const ScalarField m1 = apply_elliptic(1.0, a, u);
  const ScalarField m0 = apply_elliptic(0.0, a, u);
  for (int64_t s = 0; s < t->sites(); ++s)
    CHECK(m1.v[s] - m0.v[s] == doctest::Approx(u.v[s]).epsilon(1e-13));
}

TEST_CASE("apply_elliptic is symmetric and matches the dense assembly") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 17, 0);
  const ScalarField u = random_scalar(t, 7);
  const ScalarField v = random_scalar(t, 8);
  const double uv = dot(apply_elliptic(0.7, env.a, u), v);
  const double vu = dot(u, apply_elliptic(0.7, env.a, v));
  CHECK(std::abs(uv - vu) <= 1e-12 * std::abs(uv));

  const auto M = dense_operator_matrix(env, 0.7);
  const int64_t n = t->sites();
  const ScalarField Au = apply_elliptic(0.7, env.a, u);
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < n; ++j) acc += M[i * n + j] * u.v[j];
    CHECK(Au.v[i] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("apply_elliptic with mu = 0 annihilates constants exactly") {
  auto t = make_torus(3, 5);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 18, 0);
  ScalarField u(t);
  for (auto& v : u.v) v = 3.141592653589793;
  const ScalarField out = apply_elliptic(0.0, env.a, u);
  for (double v : out.v) CHECK(v == 0.0);
}

TEST_CASE("apply_elliptic is positive definite for mu > 0") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 19, 0);
  const double mu = 0.37;
  for (uint64_t s = 0; s < 5; ++s) {
    const ScalarField u = random_scalar(t, 100 + s);
    CHECK(dot(u, apply_elliptic(mu, env.a, u)) >= mu * dot(u, u) * (1.0 - 1e-12));
  }
}

TEST_CASE("row sums of the mu = 0 operator vanish") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 20, 0);
  const ScalarField u = random_scalar(t, 9);
  const ScalarField out = apply_elliptic(0.0, env.a, u);
  double total = 0.0, scale = 0.0;
  for (double v : out.v) {
    total += v;
    scale += std::abs(v);
  }
  CHECK(std::abs(total) <= 1e-12 * scale);
}

TEST_CASE("apply_elliptic rejects non-positive conductances") {
  auto t = make_torus(3, 4);
  EdgeField a(t);
  for (auto& v : a.v) v = 1.0;
  a.v[5] = 0.0;
  ScalarField u(t);
  CHECK_THROWS_AS(apply_elliptic(0.0, a, u), std::invalid_argument);
}

TEST_CASE("field serialization round-trips with a JSON header") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "corrlab_fields";
  fs::create_directories(dir);
  auto t = make_torus(3, 4);
  const ScalarField f = random_scalar(t, 10);
  save_field(f, (dir / "site").string());
  const ScalarField g = load_scalar_field((dir / "site").string());
  CHECK(g.torus->side() == 4);
  CHECK(g.v == f.v);

  const EdgeField e = random_edges(t, 11);
  save_field(e, (dir / "edge").string());
  const EdgeField h = load_edge_field((dir / "edge").string());
  CHECK(h.v == e.v);
  CHECK_THROWS(load_scalar_field((dir / "edge").string()));
}

TEST_CASE("torus geometry validates its arguments") {
  CHECK_THROWS_AS(make_torus(1, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_torus(3, 1), std::invalid_argument);
  auto t = make_torus(4, 3);
  CHECK(t->sites() == 81);
  CHECK(t->edges() == 324);
  CHECK(t->edge_base(t->edge_index(7, 2)) == 7);
  CHECK(t->edge_axis(t->edge_index(7, 2)) == 2);
}
