#include "corrlab/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace corrlab {

namespace {

// Eigenvalues of the symmetric Jacobi matrix give the nodes; the weights are
// mu0 * (first eigenvector component)^2.
Quadrature golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = int(offdiag.size()) + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    J(i, i + 1) = offdiag[i];
    J(i + 1, i) = offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw std::runtime_error("golub-welsch: eigensolver failed");
  Quadrature q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    q.x[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    q.w[i] = mu0 * v0 * v0;
  }
  return q;
}

}  // namespace

Quadrature gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  std::vector<double> off(n - 1);
  for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(off, 2.0);
}

Quadrature gauss_legendre_01(int n) {
  Quadrature q = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    q.x[i] = 0.5 * (q.x[i] + 1.0);
    q.w[i] *= 0.5;
  }
  return q;
}

Quadrature gauss_hermite_prob(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  std::vector<double> off(n - 1);
  for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(double(k));
  return golub_welsch(off, 1.0);
}

}  // namespace corrlab
