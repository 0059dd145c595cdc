#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/stats.hpp"

using namespace corrlab;

TEST_CASE("philox 4x32-10 known-answer vectors") {
  uint32_t out[4];
  philox4x32(0, 0, 0, out);
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
  philox4x32(~uint64_t(0), ~uint64_t(0), ~uint64_t(0), out);
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);
}

TEST_CASE("sampling is bit-identical for the same (seed, index)") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.9, 1.1, 1.0);
  const Environment a = sample_environment(t, map, 42, 3);
  const Environment b = sample_environment(t, map, 42, 3);
  CHECK(a.zeta.v == b.zeta.v);
  CHECK(a.a.v == b.a.v);
  const Environment c = sample_environment(t, map, 42, 4);
  CHECK(a.zeta.v != c.zeta.v);
}

TEST_CASE("law of large numbers at one million edges") {
  auto t = make_torus(3, 70);  // 3*70^3 = 1.029e6 edges
  const EdgeField z = sample_gaussian_edges(t, 7, 0);
  const MeanErr me = mean_stderr(z.v);
  CHECK(std::abs(me.mean) < 5e-3);
  CHECK(std::abs(sample_variance(z.v) - 1.0) < 1e-2);
  // normality sanity: excess kurtosis within 3 sigma of its CLT band
  const double k = excess_kurtosis(z.v);
  CHECK(std::abs(k) < 3.0 * std::sqrt(24.0 / double(z.v.size())));
}

TEST_CASE("distinct sample indices give independent fields") {
  auto t = make_torus(3, 32);
  const EdgeField a = sample_gaussian_edges(t, 7, 1);
  const EdgeField b = sample_gaussian_edges(t, 7, 2);
  double cov = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) cov += a.v[i] * b.v[i];
  cov /= double(a.v.size());
  CHECK(std::abs(cov) < 3.0 / std::sqrt(double(a.v.size())));
}

TEST_CASE("tanh map hits the midpoint at zero disorder") {
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  CHECK(map.a(0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tanh map satisfies range, monotonicity and derivative bounds") {
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 0.8);
  double prev = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = -10.0 + 0.05 * i;
    const double v = map.a(x);
    CHECK(v >= map.a_min());
    CHECK(v <= map.a_max());
    if (i > 0) CHECK(v >= prev);  // monotone for the tanh family
    prev = v;
    CHECK(std::abs(map.da(x)) <= map.sup_da() * (1.0 + 1e-12));
    CHECK(std::abs(map.d2a(x)) <= map.sup_d2a() * (1.0 + 1e-12));
    // derivatives consistent with central finite differences
    const double h = 1e-5;
    CHECK(map.da(x) ==
          doctest::Approx((map.a(x + h) - map.a(x - h)) / (2 * h)).epsilon(1e-6));
    CHECK(map.d2a(x) ==
          doctest::Approx((map.da(x + h) - map.da(x - h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("constant map has zero derivatives") {
  const auto map = CoefficientMap::constant(2.0);
  CHECK(map.a(1.7) == 2.0);
  CHECK(map.da(1.7) == 0.0);
  CHECK(map.d2a(1.7) == 0.0);
  CHECK(map.sup_da() == 0.0);
}

TEST_CASE("coefficient map rejects bad parameters") {
  CHECK_THROWS_AS(CoefficientMap::tanh_family(-1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CoefficientMap::tanh_family(1.0, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CoefficientMap::constant(0.0), std::invalid_argument);
}

TEST_CASE("ou_interpolate endpoints return the inputs exactly") {
  auto t = make_torus(3, 6);
  const EdgeField z = sample_gaussian_edges(t, 9, 0);
  const EdgeField f = sample_gaussian_edges(t, 9, fresh_stream(0));
  CHECK(ou_interpolate({z, f, 1.0}).v == z.v);
  CHECK(ou_interpolate({z, f, 0.0}).v == f.v);
  CHECK_THROWS_AS(ou_interpolate({z, f, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(ou_interpolate({z, f, -0.1}), std::invalid_argument);
}

TEST_CASE("ou coupling has the prescribed covariance and unit marginals") {
  auto t = make_torus(3, 70);
  const EdgeField z = sample_gaussian_edges(t, 11, 0);
  const EdgeField f = sample_gaussian_edges(t, 11, fresh_stream(0));
  const double s = 0.6;
  const EdgeField c = ou_interpolate({z, f, s});
  double cov = 0.0, var = 0.0;
  for (size_t i = 0; i < z.v.size(); ++i) {
    cov += z.v[i] * c.v[i];
    var += c.v[i] * c.v[i];
  }
  cov /= double(z.v.size());
  var /= double(z.v.size());
  CHECK(std::abs(cov - s) < 1e-2);
  CHECK(std::abs(var - 1.0) < 1e-2);
  CHECK(std::abs(excess_kurtosis(c.v)) < 3.0 * std::sqrt(24.0 / double(c.v.size())));
}

TEST_CASE("perturb_edge: identity at h = 0 and exact round trip") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.9, 1.1, 1.0);
  const Environment env = sample_environment(t, map, 13, 0);
  const Environment same = perturb_edge(env, 10, 0.0);
  CHECK(same.zeta.v == env.zeta.v);
  CHECK(same.a.v == env.a.v);

  // pick an edge where zeta is O(1) so the power-of-two add/subtract is exact
  int64_t edge = -1;
  for (int64_t e = 0; e < t->edges(); ++e) {
    if (std::abs(env.zeta.v[e]) > 0.25 && std::abs(env.zeta.v[e]) < 2.0) {
      edge = e;
      break;
    }
  }
  REQUIRE(edge >= 0);
  const double h = 0.125;
  const Environment fwd = perturb_edge(env, edge, h);
  const Environment back = perturb_edge(fwd, edge, -h);
  CHECK(back.zeta.v == env.zeta.v);
  CHECK(back.a.v == env.a.v);
  CHECK_THROWS_AS(perturb_edge(env, edge, std::nan("")), std::invalid_argument);
}

TEST_CASE("perturbation obeys the Taylor remainder bound") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const Environment env = sample_environment(t, map, 14, 0);
  const int64_t e = 7;
  const double z = env.zeta.v[e];
  for (int k = 3; k <= 8; ++k) {
    const double h = std::pow(2.0, -k);
    const Environment p = perturb_edge(env, e, h);
    const double lin = std::abs(p.a.v[e] - env.a.v[e] - h * map.da(z));
    CHECK(lin <= 0.5 * h * h * map.sup_d2a() * (1.0 + 1e-12));
  }
}
