// Deterministic kernels: the continuum Green function of -div(A grad) in
// closed form, the predicted correlation kernel with Fourier multiplier
// (p.Qp)/(p.Ap)^2, the discrete-to-continuum comparison, and the
// Gaussian-free-field discrepancy diagnostic.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "corrlab/stats.hpp"

namespace corrlab {

// Symbol of the lattice operator: s(p) = 2 sum_j A_j (1 - cos p_j),
// p in [-pi, pi]^d.
double symbol(std::span<const double> A_diag, std::span<const double> p);

// Closed-form Green function of -div(A grad) on R^d (diagonal A, d >= 3):
// 1 / ((d-2) gamma_d sqrt(det A) (x . A^{-1} x)^{(d-2)/2}).
double continuum_green(std::span<const double> A_diag, std::span<const double> x);
std::vector<double> continuum_green_grad(std::span<const double> A_diag,
                                         std::span<const double> x);

double sphere_area(int d);  // gamma_d, surface measure of S^{d-1}

// K(x) = (2 pi)^{-d} int e^{-ip.x} (p.Qp)/(p.Ap)^2 dp, d = 3 only.
// Closed form via the heat-kernel representation (valid for any diagonal A).
double kernel_k_closed(std::span<const double> Q_rowmajor,
                       std::span<const double> A_diag, std::span<const double> x);

struct KernelSynthesis {
  double value = 0.0;          // epsilon -> 0 extrapolation
  std::vector<double> eps;     // regularizer grid
  std::vector<double> values;  // per-epsilon regularized values
  double err = 0.0;            // extrapolation residual estimate
};

// Numerical Fourier synthesis with Gaussian regularizer e^{-eps |p|^2}
// and Richardson extrapolation over eps (default {1e-2, 1e-3, 1e-4}).
KernelSynthesis kernel_k_fourier(std::span<const double> Q_rowmajor,
                                 std::span<const double> A_diag,
                                 std::span<const double> x,
                                 std::span<const double> eps_grid = {});

// Both methods; throws if they disagree beyond tol (relative).
double kernel_k(std::span<const double> Q_rowmajor, std::span<const double> A_diag,
                std::span<const double> x, double tol = 1e-4);

struct GffDefect {
  double defect = 0.0;            // min over B of sup |(p.Qp)(p.Bp)/(p.Ap)^2 - 1|
  std::vector<double> B;          // arg-min, row-major d x d
  bool converged = false;
  int evaluations = 0;
};

// Distance of the kernel multiplier from the Gaussian-free-field family
// 1/(p.Bp): zero iff (p.Ap)^2/(p.Qp) is itself a quadratic form.
GffDefect gff_defect(std::span<const double> Q_rowmajor, std::span<const double> A_diag,
                     int sphere_points = 512);

struct DiscreteContinuumRow {
  double r = 0.0;
  double discrete = 0.0;
  double continuum = 0.0;
  double diff = 0.0;
  double scaled = 0.0;  // |diff| * r^d
};

struct DiscreteContinuumReport {
  std::vector<DiscreteContinuumRow> rows;
  DecayFit fit;          // log-log slope of |diff|
  double scaled_ratio = 0.0;  // max/min of the scaled column
};

// Tabulates |grad_k G_h(x) - d_k calG_h(x)| along the ray x = n*e_axis.
DiscreteContinuumReport discrete_vs_continuum_report(std::span<const double> A_diag,
                                                     int axis, int n_min, int n_max);

}  // namespace corrlab
