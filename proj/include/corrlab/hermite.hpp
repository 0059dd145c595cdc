// Hermite-expansion oracle for low-dimensional Gaussian functionals.
// The OU number operator acts on a product of probabilist Hermite
// polynomials as multiplication by the total degree, so (L+1)^{-1} is
// exact on the expansion coefficients.
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace corrlab {

double hermite_poly(int n, double t);  // probabilist He_n

class HermiteExpansion {
 public:
  // Projects f (a function of `vars` standard Gaussian coordinates) onto
  // products of Hermite polynomials of total degree <= degree, using a
  // tensor Gauss-Hermite grid with grid_nodes points per variable.
  static HermiteExpansion project(const std::function<double(std::span<const double>)>& f,
                                  int vars, int degree, int grid_nodes = 0);

  // Expansion with a single term: coefficient 1 on He_alpha.
  static HermiteExpansion monomial(std::span<const int> alpha);

  int vars() const { return vars_; }
  int degree() const { return degree_; }
  size_t terms() const { return coef_.size(); }
  double coefficient(std::span<const int> alpha) const;
  // 0 when alpha lies outside the truncation set
  double coefficient_or_zero(std::span<const int> alpha) const;

  double evaluate(std::span<const double> t) const;

  // Relative L2 error of the truncated reconstruction, measured on the
  // projection grid. Zero for polynomials within the degree budget.
  double truncation_error() const { return trunc_err_; }

  // Coefficients scaled by 1/(|alpha|+1): the resolvent (L+1)^{-1} f.
  HermiteExpansion apply_resolvent() const;

  // E[f g] via orthogonality (sum of coef products times alpha!).
  static double inner(const HermiteExpansion& f, const HermiteExpansion& g);

  // E[f (L+1)^{-1} g] = sum_alpha f_alpha g_alpha alpha! / (|alpha|+1).
  static double resolvent_bilinear(const HermiteExpansion& f, const HermiteExpansion& g);

  double mean() const;  // coefficient of the empty index
  double l2_norm() const;

  // Lp norm under the Gaussian measure, evaluated on a tensor
  // Gauss-Hermite grid.
  double lp_norm(double p, int grid_nodes = 0) const;

 private:
  HermiteExpansion() = default;
  void build_index_set();

  int vars_ = 0;
  int degree_ = 0;
  std::vector<std::vector<int>> indices_;
  std::vector<double> coef_;
  double trunc_err_ = 0.0;
};

}  // namespace corrlab
