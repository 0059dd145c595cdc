// Vertical-derivative calculus: bilinear forms E[f (L+1)^{-1} g] by
// Mehler-coupled Monte Carlo over a Gauss-Legendre grid in the coupling
// parameter, plus the Helffer-Sjostrand covariance harness.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/hermite.hpp"
#include "corrlab/quadrature.hpp"
#include "corrlab/stats.hpp"

namespace corrlab {

// A functional of a Gaussian family. Either a function of `arity`
// distinguished coordinates, or of a whole edge field.
struct Functional {
  int arity = 0;
  std::function<double(std::span<const double>)> eval;
  // optional per-coordinate vertical derivatives
  std::vector<std::function<double(std::span<const double>)>> deriv;

  bool whole_field = false;
  std::function<double(const EdgeField&)> field_eval;

  static Functional of_coords(int arity,
                              std::function<double(std::span<const double>)> f) {
    Functional fn;
    fn.arity = arity;
    fn.eval = std::move(f);
    return fn;
  }
  static Functional of_field(std::function<double(const EdgeField&)> f) {
    Functional fn;
    fn.whole_field = true;
    fn.field_eval = std::move(f);
    return fn;
  }
};

struct QuadratureSpec {
  int nodes = 8;             // Gauss-Legendre nodes on [0, 1]
  int64_t mc_samples = 20000;
  uint64_t seed = 1;
  double exclusion_budget = 0.01;  // fraction of non-finite samples tolerated
};

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int64_t used = 0;
  int64_t excluded = 0;
};

// E[f (L+1)^{-1} g] = int_0^1 E[f(zeta) g(s zeta + sqrt(1-s^2) zeta')] ds,
// estimated sample-by-sample with the quadrature collapsed inside each
// sample (the CLT error bar therefore carries the quadrature weights).
// Coordinate functionals share one coordinate block; whole-field
// functionals require a torus to sample on.
McEstimate resolvent_bilinear_mc(const Functional& f, const Functional& g,
                                 const QuadratureSpec& quad,
                                 const TorusPtr& torus = nullptr);

// Right-hand side of the Helffer-Sjostrand identity
//   Cov(f, g) = sum_e E[d_e f (L+1)^{-1} d_e g],
// summed over the shared coordinates (both functionals must carry
// analytic derivative evaluators).
McEstimate hs_covariance(const Functional& f, const Functional& g,
                         const QuadratureSpec& quad);

// Direct covariance estimate (oracle side of the HS checks).
McEstimate direct_covariance_mc(const Functional& f, const Functional& g,
                                int64_t samples, uint64_t seed);

struct ContractionReport {
  double ratio = 0.0;    // ||(L+1)^{-1} f||_p / ||f||_p
  double err = 0.0;      // statistical error on the ratio (MC route)
  double norm_num = 0.0;
  double norm_den = 0.0;
  std::string method;    // "hermite" or "mc"
};

// Contraction check via deterministic quadrature of the Mehler integral
// (p-norms of f and (L+1)^{-1} f on a Gauss-Hermite grid; arity <= 3).
ContractionReport lp_contraction_oracle(const Functional& f, double p, int nodes = 32);

// Contraction check via nested Monte Carlo: u(zeta) is estimated with
// inner_samples fresh couplings per outer sample.
ContractionReport lp_contraction_mc(const Functional& f, double p,
                                    const QuadratureSpec& quad, int64_t outer_samples,
                                    int inner_samples);

// Hermite-oracle value of E[f (L+1)^{-1} g] for coordinate functionals.
double hermite_resolvent_value(const Functional& f, const Functional& g, int degree = 12);

}  // namespace corrlab
