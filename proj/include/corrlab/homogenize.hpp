// Monte Carlo estimation of the homogenized matrix A_h and of the
// correlation-structure matrix Q built from resolvent bilinear forms of
// corrected fluxes.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/solver.hpp"

namespace corrlab {

struct HomogenizedData {
  int dim = 0;
  int side = 0;
  double mu = 0.0;
  int64_t samples = 0;
  uint64_t seed = 0;
  int nodes = 0;  // Mehler quadrature nodes (Q only)

  std::vector<double> Ah;      // d x d row-major
  std::vector<double> Ah_err;  // entrywise CLT standard errors
  double ah_scalar = 0.0;      // isotropic fit: mean of the diagonal
  double ah_err = 0.0;

  std::vector<double> xi;      // direction of Q (empty if only Ah estimated)
  std::vector<double> Q;       // d x d row-major
  std::vector<double> Q_err;

  std::string to_json() const;
};

// Entry (i, j): average over environments and over all edges in direction i
// of a(e) (1_{i=j} + grad_i phi_j)(e). Error bars are environment-level.
HomogenizedData estimate_Ah(const TorusPtr& torus, const CoefficientMap& map, double mu,
                            int64_t samples, uint64_t seed, const SolveConfig& cfg,
                            int threads = 1);

// Q_jk = sum over the d edge orientations of the Mehler-quadrature estimate
// of E[F_j (L+1)^{-1} F_k] with F_j(e) = a'(zeta_e)(e_j + grad phi_j)(e)
// (xi + grad phi_xi)(e); correctors solved at mu = 0 on the primary and on
// every coupled environment; base-point averaged. Also fills the Ah fields
// from the primary corrector solves.
HomogenizedData estimate_Q(const TorusPtr& torus, const CoefficientMap& map,
                           std::span<const double> xi, int nodes, int64_t samples,
                           uint64_t seed, const SolveConfig& cfg, int threads = 1);

// Direct scalar route for xi'.Q^(xi) xi' via a dedicated corrector solve in
// the direction xi' (consistency oracle against the matrix contraction).
struct ScalarQEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};
ScalarQEstimate estimate_Q_quadratic_form(const TorusPtr& torus, const CoefficientMap& map,
                                          std::span<const double> xi,
                                          std::span<const double> xi_prime, int nodes,
                                          int64_t samples, uint64_t seed,
                                          const SolveConfig& cfg);

struct PositivityReport {
  std::vector<double> eigenvalues;      // ascending
  std::vector<double> eigenvalue_err;   // first-order propagated errors
  bool flagged = false;                 // some eigenvalue < -3 sigma
};

PositivityReport q_positivity_report(std::span<const double> Q,
                                     std::span<const double> Q_err, int d);

// Gauss-Hermite values of E[a(zeta)] and 1/E[1/a(zeta)] (Voigt-Reuss bounds).
double arithmetic_mean_a(const CoefficientMap& map, int nodes = 80);
double harmonic_mean_a(const CoefficientMap& map, int nodes = 80);

}  // namespace corrlab
