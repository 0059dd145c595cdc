// Conjugate-gradient solver for (mu + div a grad) u = f on the torus,
// correctors, Green-function columns, and a dense small-instance oracle.
#pragma once

#include <stdexcept>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/lattice.hpp"

namespace corrlab {

struct SolveConfig {
  double tol = 1e-10;  // relative residual target
  int max_iter = 20000;
  enum class Precond { none, diagonal };
  Precond precond = Precond::diagonal;
};

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
  std::vector<double> history;  // ||r|| per iteration
};

class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& what, SolveStats stats)
      : std::runtime_error(what), stats(std::move(stats)) {}
  SolveStats stats;
};

// Solves (mu + div a grad) u = f. For mu = 0 requires sum(f) = 0 and
// returns the zero-mean solution.
ScalarField solve(const Environment& env, double mu, const ScalarField& f,
                  const SolveConfig& cfg, SolveStats* stats = nullptr);

struct CorrectorSet {
  double mu = 0.0;
  std::vector<ScalarField> phi;       // d fields, direction j
  std::vector<EdgeField> grad_phi;    // gradients of phi_j
  std::vector<SolveStats> stats;

  // phi_xi by linearity: sum_j xi_j * phi_j
  ScalarField phi_xi(std::span<const double> xi) const;
  EdgeField grad_phi_xi(std::span<const double> xi) const;
  // (xi + grad phi_xi)(e) with xi read as the edge function xi(e) = xi_axis
  EdgeField corrected_gradient(std::span<const double> xi) const;
};

// Solves mu*phi_j + div A (e_j + grad phi_j) = 0 for each direction j.
// mu = 0 fields are torus-mean zero.
CorrectorSet solve_correctors(const Environment& env, double mu, const SolveConfig& cfg);

// Single corrector in the direction xi (one solve, rhs = -div(A xi)).
ScalarField solve_corrector_direction(const Environment& env, double mu,
                                      std::span<const double> xi, const SolveConfig& cfg,
                                      SolveStats* stats = nullptr);

struct GreenColumn {
  double mu = 0.0;
  int64_t source = 0;
  ScalarField values;
  SolveStats stats;

  // gradient of G(x0, .) at edge e
  double grad(int64_t edge) const {
    return values.v[values.torus->edge_tip(edge)] - values.v[values.torus->edge_base(edge)];
  }
};

// mu > 0: (mu + div a grad) G = 1_{x0}. mu = 0: source 1_{x0} - 1/N,
// zero-mean normalization.
GreenColumn green_column(const Environment& env, double mu, int64_t x0,
                         const SolveConfig& cfg);

// Dense direct solve (LU) with identical normalization rules; site_count
// guard at 4096. Ground truth for the iterative path.
ScalarField dense_oracle_solve(const Environment& env, double mu, const ScalarField& f);

// Dense operator matrix, row-major site order (tests and representation checks).
std::vector<double> dense_operator_matrix(const Environment& env, double mu);

// All N columns of the mean-adjusted mu = 0 Green matrix (dense path,
// same size guard). Row x, column y in site order.
std::vector<double> dense_green_matrix(const Environment& env);

}  // namespace corrlab
