// Two-scale expansion machinery: the defect field z, the flux-correction
// objects R and h, the exact residual identity, the Green-matrix
// representation, and the vertical-derivative formulas.
#pragma once

#include <span>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/solver.hpp"

namespace corrlab {

// Index conventions (frozen; the identity is exact only with these):
//   grad_j f(x)  = f(x + e_j) - f(x)
//   grad*_i f(x) = f(x - e_i) - f(x)
//   hess_{ij}    = grad*_i grad_j G_h
//   R_ij(x)      = ah 1_{i=j} - a((x-e_i, i)) (1_{i=j} + grad_i phi_j(x-e_i))
//   h((x,i))     = -a((x,i)) sum_j phi_j(x+e_i) [grad_j G_h(x+e_i) - grad_j G_h(x)]
//   z(x)         = G(0,x) - G_h(x) - sum_j phi_j(x) grad_j G_h(x)
struct TwoScaleBundle {
  TorusPtr torus;
  double ah = 0.0;
  EdgeField a;                       // coefficients of the environment
  ScalarField Gh;                    // torus homogenized Green table (mean zero)
  std::vector<ScalarField> grad_Gh;  // d tables grad_j G_h
  std::vector<double> hess;          // site-major d*d blocks: grad*_i grad_j G_h
  std::vector<double> R;             // site-major d*d blocks
  EdgeField h;
  ScalarField z;
  std::vector<ScalarField> phi;      // the correctors used
};

// green0 must be the mu = 0 column at source 0; correctors at mu = 0.
TwoScaleBundle build_bundle(const Environment& env, const CorrectorSet& correctors,
                            const GreenColumn& green0, double ah);

// contraction sum_ij R_ij(x) hess_ij(x)
ScalarField contract_R_hess(const TwoScaleBundle& b);

struct ResidualReport {
  double max_dev = 0.0;   // max |residual - mean(residual)|
  double mean = 0.0;      // the torus-mean adjustment constant
  double linf = 0.0;      // raw max |residual|
};

// div(A grad z) - R : hess - div h; vanishes up to solver tolerance.
ScalarField residual_z(const TwoScaleBundle& b);
ResidualReport residual_report(const TwoScaleBundle& b);

struct RepresentationReport {
  double max_aligned_dev = 0.0;  // after removing the torus-mean of both sides
  double rhs_scale = 0.0;
};

// z(x) = sum_y G(x,y)(R:hess)(y) + sum_b grad G(x,b) h(b), checked against
// the dense mean-adjusted Green matrix (site_count <= 4096). omit_h exists
// as a negative control for the index conventions.
RepresentationReport representation_z_check(const Environment& env,
                                            const TwoScaleBundle& b, bool omit_h = false);

// d_e phi_xi(x) = -a'(zeta_e) grad G_mu(x, e) (xi + grad phi_xi)(e).
// mu = 0 uses the mean-adjusted column (the mu -> 0 definition).
double vertical_derivative_corrector(const Environment& env, double mu, int64_t edge,
                                     int64_t x, std::span<const double> xi,
                                     const SolveConfig& cfg);

// d_e G_mu(x,y) = -a'(zeta_e) grad G_mu(x, e) grad G_mu(y, e).
double vertical_derivative_green(const Environment& env, double mu, int64_t edge,
                                 int64_t x, int64_t y, const SolveConfig& cfg);

// Central finite differences through perturb_edge (validation oracles).
double fd_corrector_derivative(const Environment& env, double mu, int64_t edge, int64_t x,
                               std::span<const double> xi, double step,
                               const SolveConfig& cfg);
double fd_green_derivative(const Environment& env, double mu, int64_t edge, int64_t x,
                           int64_t y, double step, const SolveConfig& cfg);

}  // namespace corrlab
