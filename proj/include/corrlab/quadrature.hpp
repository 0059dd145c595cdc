// Gauss quadrature rules via Golub-Welsch.
#pragma once

#include <vector>

namespace corrlab {

struct Quadrature {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre on [-1, 1]; weights sum to 2.
Quadrature gauss_legendre(int n);

// Gauss-Legendre mapped to [0, 1]; weights sum to 1.
Quadrature gauss_legendre_01(int n);

// Gauss-Hermite for the standard normal weight; weights sum to 1,
// exact for polynomials of degree <= 2n-1 under E[.].
Quadrature gauss_hermite_prob(int n);

// Integrate fn over [a, b] with npanels composite panels of an n-node
// Gauss-Legendre rule.
template <typename F>
double composite_gauss(F&& fn, double a, double b, int npanels, const Quadrature& rule) {
  double total = 0.0;
  const double h = (b - a) / npanels;
  for (int p = 0; p < npanels; ++p) {
    const double lo = a + p * h;
    for (size_t k = 0; k < rule.x.size(); ++k) {
      const double t = lo + 0.5 * h * (rule.x[k] + 1.0);
      total += 0.5 * h * rule.w[k] * fn(t);
    }
  }
  return total;
}

}  // namespace corrlab
