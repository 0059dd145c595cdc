#include "corrlab/homogenize.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "corrlab/parallel.hpp"
#include "corrlab/quadrature.hpp"
#include "corrlab/stats.hpp"

namespace corrlab {

namespace {

// Per-sample flux matrix: entry (i, j) = avg over base points of
// a((x,i)) (1_{i=j} + grad_i phi_j((x,i))).
std::vector<double> flux_matrix(const Environment& env, const CorrectorSet& set) {
  const Torus& T = *env.torus;
  const int d = T.dim();
  std::vector<double> M(d * d, 0.0);
  for (int64_t e = 0; e < T.edges(); ++e) {
    const int i = T.edge_axis(e);
    const double ae = env.a.v[e];
    for (int j = 0; j < d; ++j) {
      M[i * d + j] += ae * ((i == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
    }
  }
  for (double& m : M) m /= double(T.sites());
  return M;
}

// F_j(e) = a'(zeta_e) (e_j + grad phi_j)(e) (xi + grad phi_xi)(e), all edges.
std::vector<EdgeField> flux_functionals(const Environment& env, const CorrectorSet& set,
                                        std::span<const double> xi) {
  const Torus& T = *env.torus;
  const int d = T.dim();
  const EdgeField corrected = set.corrected_gradient(xi);
  std::vector<EdgeField> F(d, EdgeField(env.torus));
  for (int64_t e = 0; e < T.edges(); ++e) {
    const int axis = T.edge_axis(e);
    const double common = env.map.da(env.zeta.v[e]) * corrected.v[e];
    for (int j = 0; j < d; ++j) {
      F[j].v[e] = common * ((axis == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
    }
  }
  return F;
}

// Scalar variant: F(e) = a'(zeta_e)(xi' + grad phi_xi')(e)(xi + grad phi_xi)(e).
EdgeField flux_functional_scalar(const Environment& env, const EdgeField& corrected_xi,
                                 const EdgeField& corrected_xip) {
  EdgeField F(env.torus);
  for (int64_t e = 0; e < env.torus->edges(); ++e) {
    F.v[e] = env.map.da(env.zeta.v[e]) * corrected_xi.v[e] * corrected_xip.v[e];
  }
  return F;
}

}  // namespace

std::string HomogenizedData::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["side"] = side;
  j["mu"] = mu;
  j["samples"] = samples;
  j["seed"] = seed;
  j["nodes"] = nodes;
  j["Ah"] = Ah;
  j["Ah_err"] = Ah_err;
  j["ah_scalar"] = ah_scalar;
  j["ah_err"] = ah_err;
  if (!xi.empty()) {
    j["xi"] = xi;
    j["Q"] = Q;
    j["Q_err"] = Q_err;
  }
  return j.dump(2);
}

HomogenizedData estimate_Ah(const TorusPtr& torus, const CoefficientMap& map, double mu,
                            int64_t samples, uint64_t seed, const SolveConfig& cfg,
                            int threads) {
  if (samples < 2) throw std::invalid_argument("estimate_Ah: needs at least 2 samples");
  const int d = torus->dim();
  std::vector<std::vector<double>> entry(samples);
  parallel_for_indexed(samples, threads, [&](int64_t n) {
    const Environment env = sample_environment(torus, map, seed, uint64_t(n));
    const CorrectorSet set = solve_correctors(env, mu, cfg);
    entry[n] = flux_matrix(env, set);
  });

  HomogenizedData out;
  out.dim = d;
  out.side = torus->side();
  out.mu = mu;
  out.samples = samples;
  out.seed = seed;
  out.Ah.assign(d * d, 0.0);
  out.Ah_err.assign(d * d, 0.0);
  std::vector<double> col(samples);
  for (int ij = 0; ij < d * d; ++ij) {
    for (int64_t n = 0; n < samples; ++n) col[n] = entry[n][ij];
    const MeanErr me = mean_stderr(col);
    out.Ah[ij] = me.mean;
    out.Ah_err[ij] = me.stderr_;
  }
  for (int64_t n = 0; n < samples; ++n) {
    double diag = 0.0;
    for (int i = 0; i < d; ++i) diag += entry[n][i * d + i];
    col[n] = diag / d;
  }
  const MeanErr ms = mean_stderr(col);
  out.ah_scalar = ms.mean;
  out.ah_err = ms.stderr_;
  return out;
}

HomogenizedData estimate_Q(const TorusPtr& torus, const CoefficientMap& map,
                           std::span<const double> xi, int nodes, int64_t samples,
                           uint64_t seed, const SolveConfig& cfg, int threads) {
  const int d = torus->dim();
  if (int(xi.size()) != d) throw std::invalid_argument("estimate_Q: xi size mismatch");
  double xinorm = 0.0;
  for (double c : xi) xinorm += c * c;
  if (!(xinorm > 0.0)) throw std::invalid_argument("estimate_Q: xi must be nonzero");
  if (samples < 2) throw std::invalid_argument("estimate_Q: needs at least 2 samples");

  const Quadrature gl = gauss_legendre_01(nodes);
  std::vector<std::vector<double>> q_entry(samples), a_entry(samples);

  parallel_for_indexed(samples, threads, [&](int64_t n) {
    const Environment env = sample_environment(torus, map, seed, uint64_t(n));
    const CorrectorSet set = solve_correctors(env, 0.0, cfg);
    const auto Fprim = flux_functionals(env, set, xi);
    a_entry[n] = flux_matrix(env, set);

    const EdgeField fresh = sample_gaussian_edges(torus, seed, fresh_stream(uint64_t(n)));
    std::vector<double> Qn(d * d, 0.0);
    for (size_t q = 0; q < gl.x.size(); ++q) {
      const Environment coupled = couple_environment(env, fresh, gl.x[q]);
      const CorrectorSet cset = solve_correctors(coupled, 0.0, cfg);
      const auto Fcoup = flux_functionals(coupled, cset, xi);
      for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
          const double dp = dot_edges(Fprim[j], Fcoup[k]) / double(torus->sites());
          Qn[j * d + k] += gl.w[q] * dp;
        }
      }
    }
    // symmetrize; the pair (zeta, zeta^s) is exchangeable
    for (int j = 0; j < d; ++j)
      for (int k = j + 1; k < d; ++k) {
        const double s = 0.5 * (Qn[j * d + k] + Qn[k * d + j]);
        Qn[j * d + k] = s;
        Qn[k * d + j] = s;
      }
    q_entry[n] = std::move(Qn);
  });

  HomogenizedData out;
  out.dim = d;
  out.side = torus->side();
  out.mu = 0.0;
  out.samples = samples;
  out.seed = seed;
  out.nodes = nodes;
  out.xi.assign(xi.begin(), xi.end());
  out.Ah.assign(d * d, 0.0);
  out.Ah_err.assign(d * d, 0.0);
  out.Q.assign(d * d, 0.0);
  out.Q_err.assign(d * d, 0.0);
  std::vector<double> col(samples);
  for (int ij = 0; ij < d * d; ++ij) {
    for (int64_t n = 0; n < samples; ++n) col[n] = a_entry[n][ij];
    MeanErr me = mean_stderr(col);
    out.Ah[ij] = me.mean;
    out.Ah_err[ij] = me.stderr_;
    for (int64_t n = 0; n < samples; ++n) col[n] = q_entry[n][ij];
    me = mean_stderr(col);
    out.Q[ij] = me.mean;
    out.Q_err[ij] = me.stderr_;
  }
  for (int64_t n = 0; n < samples; ++n) {
    double diag = 0.0;
    for (int i = 0; i < d; ++i) diag += a_entry[n][i * d + i];
    col[n] = diag / d;
  }
  const MeanErr ms = mean_stderr(col);
  out.ah_scalar = ms.mean;
  out.ah_err = ms.stderr_;
  return out;
}

ScalarQEstimate estimate_Q_quadratic_form(const TorusPtr& torus, const CoefficientMap& map,
                                          std::span<const double> xi,
                                          std::span<const double> xi_prime, int nodes,
                                          int64_t samples, uint64_t seed,
                                          const SolveConfig& cfg) {
  const int d = torus->dim();
  const Quadrature gl = gauss_legendre_01(nodes);
  std::vector<double> vals(samples);
  for (int64_t n = 0; n < samples; ++n) {
    const Environment env = sample_environment(torus, map, seed, uint64_t(n));
    const ScalarField phix = solve_corrector_direction(env, 0.0, xi, cfg);
    const ScalarField phixp = solve_corrector_direction(env, 0.0, xi_prime, cfg);
    EdgeField corr_xi = gradient(phix);
    EdgeField corr_xip = gradient(phixp);
    for (int64_t e = 0; e < torus->edges(); ++e) {
      corr_xi.v[e] += xi[torus->edge_axis(e)];
      corr_xip.v[e] += xi_prime[torus->edge_axis(e)];
    }
    const EdgeField Fprim = flux_functional_scalar(env, corr_xi, corr_xip);
    const EdgeField fresh = sample_gaussian_edges(torus, seed, fresh_stream(uint64_t(n)));
    double acc = 0.0;
    for (size_t q = 0; q < gl.x.size(); ++q) {
      const Environment coupled = couple_environment(env, fresh, gl.x[q]);
      const ScalarField cphix = solve_corrector_direction(coupled, 0.0, xi, cfg);
      const ScalarField cphixp = solve_corrector_direction(coupled, 0.0, xi_prime, cfg);
      EdgeField ccorr_xi = gradient(cphix);
      EdgeField ccorr_xip = gradient(cphixp);
      for (int64_t e = 0; e < torus->edges(); ++e) {
        ccorr_xi.v[e] += xi[torus->edge_axis(e)];
        ccorr_xip.v[e] += xi_prime[torus->edge_axis(e)];
      }
      const EdgeField Fcoup = flux_functional_scalar(coupled, ccorr_xi, ccorr_xip);
      acc += gl.w[q] * dot_edges(Fprim, Fcoup) / double(torus->sites());
    }
    vals[n] = acc;
  }
  const MeanErr me = mean_stderr(vals);
  return {me.mean, me.stderr_};
}

PositivityReport q_positivity_report(std::span<const double> Q,
                                     std::span<const double> Q_err, int d) {
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = Q[i * d + j];
  Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  PositivityReport rep;
  for (int k = 0; k < d; ++k) {
    const double lam = es.eigenvalues()[k];
    // first-order propagation: dlam = v . dQ v
    double var = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double w = es.eigenvectors()(i, k) * es.eigenvectors()(j, k);
        const double sig = Q_err.empty() ? 0.0 : Q_err[i * d + j];
        var += w * w * sig * sig;
      }
    rep.eigenvalues.push_back(lam);
    rep.eigenvalue_err.push_back(std::sqrt(var));
    if (lam < -3.0 * std::sqrt(var)) rep.flagged = true;
  }
  return rep;
}

double arithmetic_mean_a(const CoefficientMap& map, int nodes) {
  const Quadrature gh = gauss_hermite_prob(nodes);
  double s = 0.0;
  for (size_t i = 0; i < gh.x.size(); ++i) s += gh.w[i] * map.a(gh.x[i]);
  return s;
}

double harmonic_mean_a(const CoefficientMap& map, int nodes) {
  const Quadrature gh = gauss_hermite_prob(nodes);
  double s = 0.0;
  for (size_t i = 0; i < gh.x.size(); ++i) s += gh.w[i] / map.a(gh.x[i]);
  return 1.0 / s;
}

}  // namespace corrlab
