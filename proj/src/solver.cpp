#include "corrlab/solver.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace corrlab {

namespace {

// Jacobi diagonal: mu + sum over incident edges of a(e).
std::vector<double> operator_diagonal(const Environment& env, double mu) {
  const Torus& T = *env.torus;
  const int d = T.dim();
  std::vector<double> diag(T.sites());
  for (int64_t s = 0; s < T.sites(); ++s) {
    double acc = mu;
    for (int axis = 0; axis < d; ++axis) {
      acc += env.a.v[s * d + axis];
      acc += env.a.v[T.neighbor(s, axis, -1) * d + axis];
    }
    diag[s] = acc;
  }
  return diag;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void project_mean_zero(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  for (double& x : v) x -= m;
}

}  // namespace

ScalarField solve(const Environment& env, double mu, const ScalarField& f,
                  const SolveConfig& cfg, SolveStats* stats_out) {
  const Torus& T = *env.torus;
  const int64_t n = T.sites();
  if (f.torus->sites() != n) throw std::invalid_argument("solve: geometry mismatch");
  if (mu < 0.0) throw std::invalid_argument("solve: mu must be >= 0");
  for (double c : env.a.v)
    if (!(c > 0.0)) throw std::invalid_argument("solve: conductance must be positive");

  const bool singular = (mu == 0.0);
  const double fnorm = norm2(f.v);
  if (singular) {
    double m = 0.0;
    for (double x : f.v) m += x;
    if (std::abs(m) > 1e-10 * std::max(1.0, fnorm))
      throw std::invalid_argument("solve: mu = 0 requires a zero-mean right-hand side");
  }

  SolveStats stats;
  ScalarField u(env.torus);
  if (fnorm == 0.0) {
    if (stats_out) *stats_out = stats;
    return u;  // u = 0
  }

  std::vector<double> diag;
  if (cfg.precond == SolveConfig::Precond::diagonal) diag = operator_diagonal(env, mu);

  // Preconditioned CG on r = f - A u, keeping iterates mean-free when singular.
  ScalarField r = f;
  if (singular) project_mean_zero(r.v);
  ScalarField z(env.torus), p(env.torus), Ap(env.torus);
  auto apply_precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (diag.empty()) {
      out = in;
    } else {
      for (int64_t i = 0; i < n; ++i) out[i] = in[i] / diag[i];
    }
    if (singular) project_mean_zero(out);
  };

  apply_precond(r.v, z.v);
  p.v = z.v;
  double rz = 0.0;
  for (int64_t i = 0; i < n; ++i) rz += r.v[i] * z.v[i];
  double rnorm = norm2(r.v);
  stats.history.push_back(rnorm);

  const double target = cfg.tol * fnorm;
  int it = 0;
  while (rnorm > target && it < cfg.max_iter) {
    apply_elliptic_into(mu, env.a, p, Ap);
    double pAp = 0.0;
    for (int64_t i = 0; i < n; ++i) pAp += p.v[i] * Ap.v[i];
    if (!(pAp > 0.0)) {
      throw SolveFailure("solve: operator lost positive-definiteness", stats);
    }
    const double alpha = rz / pAp;
    for (int64_t i = 0; i < n; ++i) u.v[i] += alpha * p.v[i];
    for (int64_t i = 0; i < n; ++i) r.v[i] -= alpha * Ap.v[i];
    if (singular) project_mean_zero(r.v);
    apply_precond(r.v, z.v);
    double rz_new = 0.0;
    for (int64_t i = 0; i < n; ++i) rz_new += r.v[i] * z.v[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int64_t i = 0; i < n; ++i) p.v[i] = z.v[i] + beta * p.v[i];
    rnorm = norm2(r.v);
    ++it;
    stats.history.push_back(rnorm);
  }
  stats.iterations = it;
  stats.rel_residual = rnorm / fnorm;
  if (rnorm > target) {
    throw SolveFailure("solve: CG did not converge within max_iter", stats);
  }
  if (singular) project_mean_zero(u.v);
  if (stats_out) *stats_out = stats;
  return u;
}

ScalarField CorrectorSet::phi_xi(std::span<const double> xi) const {
  ScalarField out(phi[0].torus);
  for (size_t j = 0; j < phi.size(); ++j)
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += xi[j] * phi[j].v[i];
  return out;
}

EdgeField CorrectorSet::grad_phi_xi(std::span<const double> xi) const {
  EdgeField out(grad_phi[0].torus);
  for (size_t j = 0; j < grad_phi.size(); ++j)
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += xi[j] * grad_phi[j].v[i];
  return out;
}

EdgeField CorrectorSet::corrected_gradient(std::span<const double> xi) const {
  EdgeField out = grad_phi_xi(xi);
  const Torus& T = *out.torus;
  const int d = T.dim();
  for (int64_t e = 0; e < T.edges(); ++e) out.v[e] += xi[T.edge_axis(e)];
  return out;
}

CorrectorSet solve_correctors(const Environment& env, double mu, const SolveConfig& cfg) {
  const Torus& T = *env.torus;
  const int d = T.dim();
  CorrectorSet set;
  set.mu = mu;
  set.phi.reserve(d);
  set.grad_phi.reserve(d);
  set.stats.resize(d);
  for (int j = 0; j < d; ++j) {
    // rhs = -div(A e_j): e_j as edge function is the direction indicator.
    EdgeField flux(env.torus);
    for (int64_t s = 0; s < T.sites(); ++s) flux.v[s * d + j] = env.a.v[s * d + j];
    ScalarField rhs = divergence(flux);
    for (double& x : rhs.v) x = -x;
    set.phi.push_back(solve(env, mu, rhs, cfg, &set.stats[j]));
    set.grad_phi.push_back(gradient(set.phi.back()));
  }
  return set;
}

ScalarField solve_corrector_direction(const Environment& env, double mu,
                                      std::span<const double> xi, const SolveConfig& cfg,
                                      SolveStats* stats) {
  const Torus& T = *env.torus;
  if (int(xi.size()) != T.dim())
    throw std::invalid_argument("solve_corrector_direction: xi size mismatch");
  EdgeField flux(env.torus);
  for (int64_t e = 0; e < T.edges(); ++e) flux.v[e] = env.a.v[e] * xi[T.edge_axis(e)];
  ScalarField rhs = divergence(flux);
  for (double& x : rhs.v) x = -x;
  return solve(env, mu, rhs, cfg, stats);
}

GreenColumn green_column(const Environment& env, double mu, int64_t x0,
                         const SolveConfig& cfg) {
  const Torus& T = *env.torus;
  GreenColumn g;
  g.mu = mu;
  g.source = x0;
  ScalarField rhs(env.torus);
  if (mu > 0.0) {
    rhs.v[x0] = 1.0;
  } else {
    const double adj = 1.0 / double(T.sites());
    for (double& x : rhs.v) x = -adj;
    rhs.v[x0] += 1.0;
  }
  g.values = solve(env, mu, rhs, cfg, &g.stats);
  return g;
}

std::vector<double> dense_operator_matrix(const Environment& env, double mu) {
  const Torus& T = *env.torus;
  const int64_t n = T.sites();
  if (n > 4096) throw std::invalid_argument("dense oracle: site count exceeds 4096");
  const int d = T.dim();
  std::vector<double> M(size_t(n) * n, 0.0);
  for (int64_t s = 0; s < n; ++s) {
    double diag = mu;
    for (int axis = 0; axis < d; ++axis) {
      const int64_t up = T.neighbor(s, axis, +1);
      const int64_t dn = T.neighbor(s, axis, -1);
      const double a_up = env.a.v[s * d + axis];
      const double a_dn = env.a.v[dn * d + axis];
      diag += a_up + a_dn;
      M[size_t(s) * n + up] -= a_up;
      M[size_t(s) * n + dn] -= a_dn;
    }
    M[size_t(s) * n + s] += diag;
  }
  return M;
}

ScalarField dense_oracle_solve(const Environment& env, double mu, const ScalarField& f) {
  const Torus& T = *env.torus;
  const int64_t n = T.sites();
  if (n > 4096) throw std::invalid_argument("dense oracle: site count exceeds 4096");
  if (mu == 0.0) {
    double m = 0.0;
    for (double x : f.v) m += x;
    if (std::abs(m) > 1e-10 * std::max(1.0, norm2(f.v)))
      throw std::invalid_argument("dense oracle: mu = 0 requires a zero-mean right-hand side");
  }
  auto Mv = dense_operator_matrix(env, mu);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
      Mv.data(), n, n);
  Eigen::MatrixXd A = M;
  if (mu == 0.0) {
    // Rank-one shift onto the constant mode: solution of the shifted system
    // with a mean-free rhs is the mean-free solution of the original one.
    A.array() += 1.0 / double(n);
  }
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(f.v.data(), n);
  if (mu == 0.0) b.array() -= b.mean();
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  ScalarField u(env.torus);
  for (int64_t i = 0; i < n; ++i) u.v[i] = x[i];
  if (mu == 0.0) u.subtract_mean();
  return u;
}

std::vector<double> dense_green_matrix(const Environment& env) {
  const Torus& T = *env.torus;
  const int64_t n = T.sites();
  if (n > 4096) throw std::invalid_argument("dense oracle: site count exceeds 4096");
  auto Mv = dense_operator_matrix(env, 0.0);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
      Mv.data(), n, n);
  Eigen::MatrixXd A = M;
  A.array() += 1.0 / double(n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  std::vector<double> G(size_t(n) * n);
  Eigen::VectorXd b(n);
  for (int64_t y = 0; y < n; ++y) {
    b.setConstant(-1.0 / double(n));
    b[y] += 1.0;
    Eigen::VectorXd col = lu.solve(b);
    col.array() -= col.mean();
    for (int64_t x = 0; x < n; ++x) G[size_t(x) * n + y] = col[x];
  }
  return G;
}

}  // namespace corrlab
