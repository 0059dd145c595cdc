#include "corrlab/twoscale.hpp"

#include <cmath>
#include <stdexcept>

#include "corrlab/lattice_green.hpp"

namespace corrlab {

TwoScaleBundle build_bundle(const Environment& env, const CorrectorSet& correctors,
                            const GreenColumn& green0, double ah) {
  const Torus& T = *env.torus;
  const int d = T.dim();
  const int64_t N = T.sites();
  if (correctors.mu != 0.0 || green0.mu != 0.0)
    throw std::invalid_argument("build_bundle: correctors and Green column must be mu = 0");
  if (green0.values.torus->sites() != N || correctors.phi[0].torus->sites() != N)
    throw std::invalid_argument("build_bundle: geometry mismatch");
  if (green0.source != 0)
    throw std::invalid_argument("build_bundle: Green column must be sourced at 0");

  TwoScaleBundle b;
  b.torus = env.torus;
  b.ah = ah;
  b.a = env.a;
  b.phi = correctors.phi;

  b.Gh = ScalarField(env.torus);
  b.Gh.v = torus_green_table(ah, T);

  b.grad_Gh.assign(d, ScalarField(env.torus));
  for (int j = 0; j < d; ++j)
    for (int64_t s = 0; s < N; ++s)
      b.grad_Gh[j].v[s] = b.Gh.v[T.neighbor(s, j, +1)] - b.Gh.v[s];

  b.hess.assign(size_t(N) * d * d, 0.0);
  for (int64_t s = 0; s < N; ++s)
    for (int i = 0; i < d; ++i) {
      const int64_t below = T.neighbor(s, i, -1);
      for (int j = 0; j < d; ++j)
        b.hess[(size_t(s) * d + i) * d + j] = b.grad_Gh[j].v[below] - b.grad_Gh[j].v[s];
    }

  b.R.assign(size_t(N) * d * d, 0.0);
  for (int64_t s = 0; s < N; ++s)
    for (int i = 0; i < d; ++i) {
      const int64_t below = T.neighbor(s, i, -1);
      const double ai = env.a.v[T.edge_index(below, i)];
      for (int j = 0; j < d; ++j) {
        const double flux =
            ai * ((i == j ? 1.0 : 0.0) + correctors.grad_phi[j].v[T.edge_index(below, i)]);
        b.R[(size_t(s) * d + i) * d + j] = (i == j ? ah : 0.0) - flux;
      }
    }

  b.h = EdgeField(env.torus);
  for (int64_t s = 0; s < N; ++s)
    for (int i = 0; i < d; ++i) {
      const int64_t up = T.neighbor(s, i, +1);
      double acc = 0.0;
      for (int j = 0; j < d; ++j)
        acc += correctors.phi[j].v[up] * (b.grad_Gh[j].v[up] - b.grad_Gh[j].v[s]);
      b.h.v[T.edge_index(s, i)] = -env.a.v[T.edge_index(s, i)] * acc;
    }

  b.z = ScalarField(env.torus);
  for (int64_t s = 0; s < N; ++s) {
    double corr = 0.0;
    for (int j = 0; j < d; ++j) corr += correctors.phi[j].v[s] * b.grad_Gh[j].v[s];
    b.z.v[s] = green0.values.v[s] - b.Gh.v[s] - corr;
  }
  return b;
}

ScalarField contract_R_hess(const TwoScaleBundle& b) {
  const Torus& T = *b.torus;
  const int d = T.dim();
  ScalarField out(b.torus);
  for (int64_t s = 0; s < T.sites(); ++s) {
    double acc = 0.0;
    const size_t base = size_t(s) * d * d;
    for (int k = 0; k < d * d; ++k) acc += b.R[base + k] * b.hess[base + k];
    out.v[s] = acc;
  }
  return out;
}

ScalarField residual_z(const TwoScaleBundle& b) {
  ScalarField lhs(b.torus);
  apply_elliptic_into(0.0, b.a, b.z, lhs);
  const ScalarField rh = contract_R_hess(b);
  const ScalarField divh = divergence(b.h);
  ScalarField res(b.torus);
  for (int64_t s = 0; s < b.torus->sites(); ++s)
    res.v[s] = lhs.v[s] - rh.v[s] - divh.v[s];
  return res;
}

ResidualReport residual_report(const TwoScaleBundle& b) {
  const ScalarField res = residual_z(b);
  ResidualReport rep;
  rep.mean = res.mean();
  for (double x : res.v) {
    rep.linf = std::max(rep.linf, std::abs(x));
    rep.max_dev = std::max(rep.max_dev, std::abs(x - rep.mean));
  }
  return rep;
}

RepresentationReport representation_z_check(const Environment& env,
                                            const TwoScaleBundle& b, bool omit_h) {
  const Torus& T = *env.torus;
  const int64_t N = T.sites();
  const int d = T.dim();
  const auto G = dense_green_matrix(env);  // size guard inside
  const ScalarField w = contract_R_hess(b);

  std::vector<double> rhs(N, 0.0);
  for (int64_t x = 0; x < N; ++x) {
    double acc = 0.0;
    const double* Grow = &G[size_t(x) * N];
    for (int64_t y = 0; y < N; ++y) acc += Grow[y] * w.v[y];
    if (!omit_h) {
      for (int64_t e = 0; e < T.edges(); ++e) {
        // gradient of G(x, .) at the edge e (second slot)
        const double gg = Grow[T.edge_tip(e)] - Grow[T.edge_base(e)];
        acc += gg * b.h.v[e];
      }
    }
    rhs[x] = acc;
  }

  double rhs_mean = 0.0, z_mean = 0.0;
  for (int64_t s = 0; s < N; ++s) {
    rhs_mean += rhs[s];
    z_mean += b.z.v[s];
  }
  rhs_mean /= double(N);
  z_mean /= double(N);

  RepresentationReport rep;
  for (int64_t s = 0; s < N; ++s) {
    const double dev = (rhs[s] - rhs_mean) - (b.z.v[s] - z_mean);
    rep.max_aligned_dev = std::max(rep.max_aligned_dev, std::abs(dev));
    rep.rhs_scale = std::max(rep.rhs_scale, std::abs(rhs[s] - rhs_mean));
  }
  return rep;
}

double vertical_derivative_corrector(const Environment& env, double mu, int64_t edge,
                                     int64_t x, std::span<const double> xi,
                                     const SolveConfig& cfg) {
  const Torus& T = *env.torus;
  const GreenColumn gx = green_column(env, mu, x, cfg);
  const ScalarField phi = solve_corrector_direction(env, mu, xi, cfg);
  const double grad_G = gx.values.v[T.edge_tip(edge)] - gx.values.v[T.edge_base(edge)];
  const double corrected = xi[T.edge_axis(edge)] +
                           (phi.v[T.edge_tip(edge)] - phi.v[T.edge_base(edge)]);
  return -env.map.da(env.zeta.v[edge]) * grad_G * corrected;
}

double vertical_derivative_green(const Environment& env, double mu, int64_t edge,
                                 int64_t x, int64_t y, const SolveConfig& cfg) {
  const Torus& T = *env.torus;
  const GreenColumn gx = green_column(env, mu, x, cfg);
  const double gradx = gx.values.v[T.edge_tip(edge)] - gx.values.v[T.edge_base(edge)];
  double grady;
  if (y == x) {
    grady = gradx;
  } else {
    const GreenColumn gy = green_column(env, mu, y, cfg);
    grady = gy.values.v[T.edge_tip(edge)] - gy.values.v[T.edge_base(edge)];
  }
  return -env.map.da(env.zeta.v[edge]) * gradx * grady;
}

double fd_corrector_derivative(const Environment& env, double mu, int64_t edge, int64_t x,
                               std::span<const double> xi, double step,
                               const SolveConfig& cfg) {
  const Environment up = perturb_edge(env, edge, step);
  const Environment dn = perturb_edge(env, edge, -step);
  const ScalarField pu = solve_corrector_direction(up, mu, xi, cfg);
  const ScalarField pd = solve_corrector_direction(dn, mu, xi, cfg);
  return (pu.v[x] - pd.v[x]) / (2.0 * step);
}

double fd_green_derivative(const Environment& env, double mu, int64_t edge, int64_t x,
                           int64_t y, double step, const SolveConfig& cfg) {
  const Environment up = perturb_edge(env, edge, step);
  const Environment dn = perturb_edge(env, edge, -step);
  const GreenColumn gu = green_column(up, mu, x, cfg);
  const GreenColumn gd = green_column(dn, mu, x, cfg);
  return (gu.values.v[y] - gd.values.v[y]) / (2.0 * step);
}

}  // namespace corrlab
