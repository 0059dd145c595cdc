#include "corrlab/resolvent.hpp"

#include <cmath>
#include <stdexcept>

namespace corrlab {

namespace {

// Streams for the coordinate sampler: primary and fresh blocks must not
// collide with each other across samples.
constexpr uint64_t kPrimaryTag = 0;
constexpr uint64_t kFreshTag = 1;

void draw_coords(uint64_t seed, uint64_t sample, uint64_t tag, int arity,
                 std::vector<double>& out) {
  out.resize(arity);
  for (int c = 0; c < arity; ++c)
    out[c] = counter_normal(seed, 2 * sample + tag, uint64_t(c));
}

McEstimate reduce_samples(const std::vector<double>& vals, int64_t excluded,
                          double budget_fraction) {
  McEstimate est;
  est.excluded = excluded;
  est.used = int64_t(vals.size());
  if (excluded > budget_fraction * double(est.used + excluded))
    throw std::runtime_error("resolvent MC: non-finite sample budget exceeded");
  const MeanErr me = mean_stderr(vals);
  est.value = me.mean;
  est.stderr_ = me.stderr_;
  return est;
}

}  // namespace

McEstimate resolvent_bilinear_mc(const Functional& f, const Functional& g,
                                 const QuadratureSpec& quad, const TorusPtr& torus) {
  const Quadrature gl = gauss_legendre_01(quad.nodes);
  std::vector<double> vals;
  vals.reserve(quad.mc_samples);
  int64_t excluded = 0;

  // The fresh noise enters antithetically: averaging g over +-zeta' keeps
  // the estimator unbiased, cuts variance, and makes the s-integrand a
  // polynomial in s whenever g is a polynomial (so Gauss-Legendre is exact
  // path by path, not just in expectation).
  if (f.whole_field || g.whole_field) {
    if (f.whole_field != g.whole_field)
      throw std::invalid_argument("resolvent MC: mixed functional kinds");
    if (!torus) throw std::invalid_argument("resolvent MC: whole-field functional needs a torus");
    EdgeField coupled(torus);
    for (int64_t n = 0; n < quad.mc_samples; ++n) {
      const EdgeField zeta = sample_gaussian_edges(torus, quad.seed, uint64_t(n));
      const EdgeField fresh =
          sample_gaussian_edges(torus, quad.seed, fresh_stream(uint64_t(n)));
      const double fv = f.field_eval(zeta);
      double acc = 0.0;
      for (size_t k = 0; k < gl.x.size(); ++k) {
        const double s = gl.x[k], t = std::sqrt(1.0 - s * s);
        for (size_t i = 0; i < coupled.v.size(); ++i)
          coupled.v[i] = s * zeta.v[i] + t * fresh.v[i];
        double gval = g.field_eval(coupled);
        for (size_t i = 0; i < coupled.v.size(); ++i)
          coupled.v[i] = s * zeta.v[i] - t * fresh.v[i];
        gval = 0.5 * (gval + g.field_eval(coupled));
        acc += gl.w[k] * gval;
      }
      const double y = fv * acc;
      if (std::isfinite(y)) {
        vals.push_back(y);
      } else {
        ++excluded;
      }
    }
    return reduce_samples(vals, excluded, quad.exclusion_budget);
  }

  const int arity = std::max(f.arity, g.arity);
  std::vector<double> zeta, fresh, coupled(arity);
  for (int64_t n = 0; n < quad.mc_samples; ++n) {
    draw_coords(quad.seed, uint64_t(n), kPrimaryTag, arity, zeta);
    draw_coords(quad.seed, uint64_t(n), kFreshTag, arity, fresh);
    const double fv = f.eval(zeta);
    double acc = 0.0;
    for (size_t k = 0; k < gl.x.size(); ++k) {
      const double s = gl.x[k], t = std::sqrt(1.0 - s * s);
      for (int c = 0; c < arity; ++c) coupled[c] = s * zeta[c] + t * fresh[c];
      double gval = g.eval(coupled);
      for (int c = 0; c < arity; ++c) coupled[c] = s * zeta[c] - t * fresh[c];
      gval = 0.5 * (gval + g.eval(coupled));
      acc += gl.w[k] * gval;
    }
    const double y = fv * acc;
    if (std::isfinite(y)) {
      vals.push_back(y);
    } else {
      ++excluded;
    }
  }
  return reduce_samples(vals, excluded, quad.exclusion_budget);
}

McEstimate hs_covariance(const Functional& f, const Functional& g,
                         const QuadratureSpec& quad) {
  if (f.deriv.empty() || g.deriv.empty())
    throw std::invalid_argument("hs_covariance: derivative evaluators required");
  const int arity = std::max(f.arity, g.arity);
  // One shared quadrature pass: per sample, accumulate the sum over edges.
  const Quadrature gl = gauss_legendre_01(quad.nodes);
  std::vector<double> vals;
  vals.reserve(quad.mc_samples);
  int64_t excluded = 0;
  std::vector<double> zeta, fresh, coupled(arity);
  for (int64_t n = 0; n < quad.mc_samples; ++n) {
    draw_coords(quad.seed, uint64_t(n), kPrimaryTag, arity, zeta);
    draw_coords(quad.seed, uint64_t(n), kFreshTag, arity, fresh);
    double y = 0.0;
    for (int e = 0; e < arity; ++e) {
      const double dfe = (e < int(f.deriv.size()) && f.deriv[e]) ? f.deriv[e](zeta) : 0.0;
      if (dfe == 0.0) continue;
      double acc = 0.0;
      for (size_t k = 0; k < gl.x.size(); ++k) {
        const double s = gl.x[k], t = std::sqrt(1.0 - s * s);
        for (int c = 0; c < arity; ++c) coupled[c] = s * zeta[c] + t * fresh[c];
        double dge = (e < int(g.deriv.size()) && g.deriv[e]) ? g.deriv[e](coupled) : 0.0;
        for (int c = 0; c < arity; ++c) coupled[c] = s * zeta[c] - t * fresh[c];
        if (e < int(g.deriv.size()) && g.deriv[e])
          dge = 0.5 * (dge + g.deriv[e](coupled));
        acc += gl.w[k] * dge;
      }
      y += dfe * acc;
    }
    if (std::isfinite(y)) {
      vals.push_back(y);
    } else {
      ++excluded;
    }
  }
  return reduce_samples(vals, excluded, quad.exclusion_budget);
}

McEstimate direct_covariance_mc(const Functional& f, const Functional& g,
                                int64_t samples, uint64_t seed) {
  const int arity = std::max(f.arity, g.arity);
  std::vector<double> fv(samples), gv(samples), prod(samples);
  std::vector<double> zeta;
  for (int64_t n = 0; n < samples; ++n) {
    draw_coords(seed, uint64_t(n), kPrimaryTag, arity, zeta);
    fv[n] = f.eval(zeta);
    gv[n] = g.eval(zeta);
    prod[n] = fv[n] * gv[n];
  }
  const MeanErr mf = mean_stderr(fv), mg = mean_stderr(gv), mp = mean_stderr(prod);
  McEstimate est;
  est.used = samples;
  est.value = mp.mean - mf.mean * mg.mean;
  // first-order error propagation through the plug-in centering
  est.stderr_ = std::sqrt(mp.stderr_ * mp.stderr_ +
                          mg.mean * mg.mean * mf.stderr_ * mf.stderr_ +
                          mf.mean * mf.mean * mg.stderr_ * mg.stderr_);
  return est;
}

namespace {

// Deterministic evaluation of u = (L+1)^{-1} f through the Mehler integral
//   u(t) = int_0^1 E[ f(s t + sqrt(1-s^2) zeta') ] ds,
// then Gauss-Hermite p-norms of u and f on the same outer grid. Exact up
// to quadrature for smooth f; no series truncation involved.
double lp_ratio_quadrature(const Functional& f, double p, int nodes, double* num,
                           double* den) {
  const int m = std::max(1, f.arity);
  if (m > 2) throw std::invalid_argument("lp contraction: quadrature oracle needs arity <= 2");
  if (m == 2) nodes = std::min(nodes, 20);  // tensor cost grows as nodes^(2m)
  const Quadrature gh = gauss_hermite_prob(nodes);
  const Quadrature gl = gauss_legendre_01(16);
  const int64_t outer = int64_t(std::pow(nodes, m));
  std::vector<int> idx(m, 0);
  std::vector<double> t(m), inner(m), arg(m);
  double up = 0.0, fp = 0.0;
  for (int64_t o = 0; o < outer; ++o) {
    double w = 1.0;
    for (int c = 0; c < m; ++c) {
      t[c] = gh.x[idx[c]];
      w *= gh.w[idx[c]];
    }
    double u = 0.0;
    for (size_t k = 0; k < gl.x.size(); ++k) {
      const double s = gl.x[k], tt = std::sqrt(1.0 - s * s);
      // inner m-dim Gauss-Hermite expectation over zeta'
      std::vector<int> jdx(m, 0);
      const int64_t inner_pts = int64_t(std::pow(nodes, m));
      double e = 0.0;
      for (int64_t q = 0; q < inner_pts; ++q) {
        double wi = 1.0;
        for (int c = 0; c < m; ++c) {
          arg[c] = s * t[c] + tt * gh.x[jdx[c]];
          wi *= gh.w[jdx[c]];
        }
        e += wi * f.eval(arg);
        for (int c = 0; c < m; ++c) {
          if (++jdx[c] < nodes) break;
          jdx[c] = 0;
        }
      }
      u += gl.w[k] * e;
    }
    up += w * std::pow(std::abs(u), p);
    fp += w * std::pow(std::abs(f.eval(t)), p);
    for (int c = 0; c < m; ++c) {
      if (++idx[c] < nodes) break;
      idx[c] = 0;
    }
  }
  *num = std::pow(up, 1.0 / p);
  *den = std::pow(fp, 1.0 / p);
  return *num / *den;
}

}  // namespace

ContractionReport lp_contraction_oracle(const Functional& f, double p, int nodes) {
  if (p < 2.0) throw std::invalid_argument("lp contraction: p must be >= 2");
  if (nodes <= 0) nodes = 32;
  ContractionReport rep;
  rep.method = "mehler-quadrature";
  rep.ratio = lp_ratio_quadrature(f, p, nodes, &rep.norm_num, &rep.norm_den);
  double num2 = 0.0, den2 = 0.0;
  const double ratio2 = lp_ratio_quadrature(f, p, nodes + 8, &num2, &den2);
  rep.err = std::abs(ratio2 - rep.ratio);
  rep.ratio = ratio2;
  rep.norm_num = num2;
  rep.norm_den = den2;
  return rep;
}

ContractionReport lp_contraction_mc(const Functional& f, double p,
                                    const QuadratureSpec& quad, int64_t outer_samples,
                                    int inner_samples) {
  if (p < 2.0) throw std::invalid_argument("lp contraction: p must be >= 2");
  const Quadrature gl = gauss_legendre_01(quad.nodes);
  const int arity = std::max(1, f.arity);
  std::vector<double> up(outer_samples), fp(outer_samples);
  std::vector<double> zeta, fresh, coupled(arity);
  for (int64_t n = 0; n < outer_samples; ++n) {
    draw_coords(quad.seed, uint64_t(n), kPrimaryTag, arity, zeta);
    double u = 0.0;
    for (int m = 0; m < inner_samples; ++m) {
      // fresh draws keyed off (sample, inner index)
      fresh.resize(arity);
      for (int c = 0; c < arity; ++c)
        fresh[c] = counter_normal(quad.seed ^ 0x5bf03635u, uint64_t(n), uint64_t(m) * arity + c);
      for (size_t k = 0; k < gl.x.size(); ++k) {
        const double s = gl.x[k], t = std::sqrt(1.0 - s * s);
        for (int c = 0; c < arity; ++c) coupled[c] = s * zeta[c] + t * fresh[c];
        u += gl.w[k] * f.eval(coupled);
      }
    }
    u /= double(inner_samples);
    up[n] = std::pow(std::abs(u), p);
    fp[n] = std::pow(std::abs(f.eval(zeta)), p);
  }
  const MeanErr mu = mean_stderr(up), mf = mean_stderr(fp);
  ContractionReport rep;
  rep.method = "mc";
  rep.norm_num = std::pow(mu.mean, 1.0 / p);
  rep.norm_den = std::pow(mf.mean, 1.0 / p);
  rep.ratio = rep.norm_num / rep.norm_den;
  // ratio error via the delta method on both p-th moments
  const double rel = std::sqrt(std::pow(mu.stderr_ / mu.mean, 2) +
                               std::pow(mf.stderr_ / mf.mean, 2)) /
                     p;
  rep.err = rep.ratio * rel;
  return rep;
}

double hermite_resolvent_value(const Functional& f, const Functional& g, int degree) {
  const int vars = std::max(std::max(f.arity, g.arity), 1);
  const HermiteExpansion fx = HermiteExpansion::project(f.eval, vars, degree);
  const HermiteExpansion gx = HermiteExpansion::project(g.eval, vars, degree);
  return HermiteExpansion::resolvent_bilinear(fx, gx);
}

}  // namespace corrlab
