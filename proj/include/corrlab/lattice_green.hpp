// Lattice Green functions of the constant-coefficient operator:
//  - infinite-lattice values through the Bessel-integral representation
//    G(x) = int_0^inf prod_j e^{-2 A_j t} I_{x_j}(2 A_j t) dt,
//  - exact torus tables through the discrete Fourier sum on the dual torus.
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "corrlab/lattice.hpp"

namespace corrlab {

// e^{-z} I_n(z) for n = 0..n_max (Miller recurrence / uniform asymptotics).
std::vector<double> scaled_bessel_i(int n_max, double z);

struct QuadResult {
  double value = 0.0;
  double err = 0.0;  // disagreement between two refinement levels
};

// G_h(x) on Z^d for the operator div(A grad) with diagonal A; x != 0 and
// x = 0 both supported. Throws on refinement disagreement.
QuadResult lattice_green_inf(std::span<const double> A_diag, std::span<const int> x);

// Forward difference G_h(x + e_axis) - G_h(x), evaluated inside one
// quadrature so the cancellation happens on the integrand.
QuadResult lattice_green_grad_inf(std::span<const double> A_diag, std::span<const int> x,
                                  int axis);

// Infinite-lattice two-scale correlation kernel
//   P(x) = sum_{j,k} Q_jk sum_y grad_j G_h(y) grad_k G_h(y - x)
// for the isotropic operator div(ah grad), through the heat-kernel
// representation of the Fourier multiplier (sig.Q sig*)/(ah lambda)^2.
QuadResult lattice_kernel_inf(std::span<const double> Q_rowmajor, double ah,
                              std::span<const int> x);

// Torus Green table for div(ah grad) with the mean-adjusted source
// 1_0 - 1/N; mean-zero; exact for the finite problem (DFT inversion).
std::vector<double> torus_green_table(double ah, const Torus& torus);

// Torus-periodized two-scale correlation prediction: inverse DFT of
//   Re[ w(k) . Q conj(w(k)) ] / (ah * lambda(k))^2,   w_j = e^{i theta_j} - 1,
// which is the discrete analogue of the continuum kernel multiplier.
std::vector<double> torus_kernel_table(std::span<const double> Q_rowmajor, double ah,
                                       const Torus& torus);

// Inverse DFT of an arbitrary real, even multiplier given by k-coordinates
// (k = 0 term forced to zero). Building block for the tables above.
std::vector<double> torus_multiplier_table(
    const Torus& torus, const std::function<double(std::span<const int>)>& multiplier);

// Translation-averaged autocorrelation (1/N) sum_y f(y) f(y+x) for every
// lag x, FFT-accelerated.
std::vector<double> torus_autocorrelation(const ScalarField& f);

}  // namespace corrlab
