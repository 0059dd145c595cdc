#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrlab/homogenize.hpp"
#include "corrlab/solver.hpp"

using namespace corrlab;

namespace {

const SolveConfig kCfg = [] {
  SolveConfig c;
  c.tol = 1e-11;
  return c;
}();

}  // namespace

TEST_CASE("constant coefficients give Ah = c Id exactly") {
  auto t = make_torus(3, 4);
  const HomogenizedData data =
      estimate_Ah(t, CoefficientMap::constant(1.3), 0.0, 2, 1, kCfg);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(data.Ah[i * 3 + j] == doctest::Approx(i == j ? 1.3 : 0.0).epsilon(1e-13));
  CHECK(data.ah_scalar == doctest::Approx(1.3).epsilon(1e-13));
}

TEST_CASE("Ah estimate sits strictly inside the Voigt-Reuss interval") {
  auto t = make_torus(3, 6);
  const auto map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  const HomogenizedData data = estimate_Ah(t, map, 0.0, 48, 2, kCfg);
  const double lo = harmonic_mean_a(map);
  const double hi = arithmetic_mean_a(map);
  CHECK(lo < hi);
  CHECK(data.ah_scalar > lo);
  CHECK(data.ah_scalar < hi);
  // off-diagonals are statistical zeros under lattice symmetry
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(std::abs(data.Ah[i * 3 + j]) < 3.0 * data.Ah_err[i * 3 + j]);
    }
}

TEST_CASE("Voigt-Reuss means come out of Gauss-Hermite quadrature") {
  const auto map = CoefficientMap::constant(2.0);
  CHECK(arithmetic_mean_a(map) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(harmonic_mean_a(map) == doctest::Approx(2.0).epsilon(1e-14));
  const auto tmap = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
  CHECK(arithmetic_mean_a(tmap) == doctest::Approx(1.0).epsilon(1e-12));  // symmetric family
  CHECK(harmonic_mean_a(tmap) < arithmetic_mean_a(tmap));
}

TEST_CASE("Q vanishes identically for constant coefficients") {
  auto t = make_torus(3, 4);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const HomogenizedData data =
      estimate_Q(t, CoefficientMap::constant(1.0), xi, 4, 2, 3, kCfg);
  for (double q : data.Q) CHECK(q == 0.0);
}

TEST_CASE("Q is invariant under xi -> -xi") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.8, 1.2, 1.0);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const std::vector<double> mxi = {-1.0, 0.0, 0.0};
  const HomogenizedData a = estimate_Q(t, map, xi, 4, 4, 5, kCfg);
  const HomogenizedData b = estimate_Q(t, map, mxi, 4, 4, 5, kCfg);
  for (int k = 0; k < 9; ++k) CHECK(a.Q[k] == doctest::Approx(b.Q[k]).epsilon(1e-13));
}

TEST_CASE("Q at weak contrast: diagonal dominance and transverse symmetry") {
  auto t = make_torus(3, 8);
  const auto map = CoefficientMap::tanh_family(2.0 / 2.2, 2.0 / 2.2 * 1.2, 1.0);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const HomogenizedData data = estimate_Q(t, map, xi, 8, 200, 6, kCfg);
  // off-diagonal entries within 3 sigma of zero
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(std::abs(data.Q[i * 3 + j]) < 3.0 * data.Q_err[i * 3 + j]);
    }
  // the two transverse diagonal entries agree
  const double diff = std::abs(data.Q[4] - data.Q[8]);
  CHECK(diff < 3.0 * (data.Q_err[4] + data.Q_err[8]));
  // longitudinal entry is the large one and strictly positive
  CHECK(data.Q[0] > 0.0);
  CHECK(data.Q[0] > data.Q[4]);

  // positivity report on the estimate
  const PositivityReport rep = q_positivity_report(data.Q, data.Q_err, 3);
  CHECK(!rep.flagged);
  CHECK(rep.eigenvalues.front() >= -3.0 * rep.eigenvalue_err.front());
}

TEST_CASE("Q scales quadratically in xi") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.8, 1.2, 1.0);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const std::vector<double> xi2 = {2.0, 0.0, 0.0};
  const HomogenizedData a = estimate_Q(t, map, xi, 6, 32, 7, kCfg);
  const HomogenizedData b = estimate_Q(t, map, xi2, 6, 32, 7, kCfg);
  for (int k = 0; k < 9; ++k) {
    const double sig = 4.0 * a.Q_err[k] + b.Q_err[k];
    CHECK(std::abs(b.Q[k] - 4.0 * a.Q[k]) <= 3.0 * std::max(sig, 1e-15));
  }
}

TEST_CASE("polarization route agrees with the matrix contraction") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.8, 1.2, 1.0);
  const std::vector<double> xi = {1.0, 0.0, 0.0};
  const std::vector<double> xip = {0.0, 1.0, 0.0};
  const HomogenizedData data = estimate_Q(t, map, xi, 6, 48, 8, kCfg);
  const ScalarQEstimate sq = estimate_Q_quadratic_form(t, map, xi, xip, 6, 48, 8, kCfg);
  double contr = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) contr += xip[i] * data.Q[i * 3 + j] * xip[j];
  double sig = sq.stderr_;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      sig += std::abs(xip[i] * xip[j]) * data.Q_err[i * 3 + j];
  CHECK(std::abs(sq.value - contr) < 3.0 * sig);
}

TEST_CASE("positivity report flags a negative eigenvalue with tiny error bars") {
  const std::vector<double> Q = {-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  const std::vector<double> err(9, 1e-6);
  const PositivityReport rep = q_positivity_report(Q, err, 3);
  CHECK(rep.flagged);
  CHECK(rep.eigenvalues.front() == doctest::Approx(-1.0));
  // and the zero matrix passes
  const std::vector<double> Z(9, 0.0);
  CHECK(!q_positivity_report(Z, err, 3).flagged);
}

TEST_CASE("finite-size drift of Ah shrinks with the torus") {
  const auto map = CoefficientMap::tanh_family(0.8, 1.2, 1.0);
  std::vector<double> est, err;
  for (int L : {4, 8, 16}) {
    const HomogenizedData d = estimate_Ah(make_torus(3, L), map, 0.0, 48, 9, kCfg);
    est.push_back(d.ah_scalar);
    err.push_back(d.ah_err);
  }
  // unexplained part of |ah(L) - ah(2L)| beyond 3 sigma, non-increasing in L
  std::vector<double> drift;
  for (size_t i = 0; i + 1 < est.size(); ++i) {
    const double gap = std::abs(est[i] - est[i + 1]);
    drift.push_back(std::max(0.0, gap - 3.0 * (err[i] + err[i + 1])));
  }
  for (size_t i = 0; i + 1 < drift.size(); ++i) CHECK(drift[i + 1] <= drift[i] + 1e-12);
}

TEST_CASE("estimator argument validation") {
  auto t = make_torus(3, 4);
  const auto map = CoefficientMap::tanh_family(0.8, 1.2, 1.0);
  CHECK_THROWS_AS(estimate_Ah(t, map, 0.0, 1, 1, kCfg), std::invalid_argument);
  const std::vector<double> zero = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(estimate_Q(t, map, zero, 4, 4, 1, kCfg), std::invalid_argument);
  const std::vector<double> short_xi = {1.0};
  CHECK_THROWS_AS(estimate_Q(t, map, short_xi, 4, 4, 1, kCfg), std::invalid_argument);
}
