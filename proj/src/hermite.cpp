#include "corrlab/hermite.hpp"

#include <cmath>
#include <stdexcept>

#include "corrlab/quadrature.hpp"

namespace corrlab {

double hermite_poly(int n, double t) {
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = t;
  for (int k = 1; k < n; ++k) {
    const double h2 = t * h1 - double(k) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

namespace {

constexpr int kMaxVars = 6;
constexpr int kMaxDegree = 12;
constexpr size_t kMaxGridPoints = 2'000'000;

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

double index_factorial(const std::vector<int>& alpha) {
  double f = 1.0;
  for (int a : alpha) f *= factorial(a);
  return f;
}

int index_total(const std::vector<int>& alpha) {
  int s = 0;
  for (int a : alpha) s += a;
  return s;
}

void enumerate_rec(int vars, int budget, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == vars) {
    out.push_back(cur);
    return;
  }
  for (int a = 0; a <= budget; ++a) {
    cur.push_back(a);
    enumerate_rec(vars, budget - a, cur, out);
    cur.pop_back();
  }
}

}  // namespace

void HermiteExpansion::build_index_set() {
  indices_.clear();
  std::vector<int> cur;
  enumerate_rec(vars_, degree_, cur, indices_);
  coef_.assign(indices_.size(), 0.0);
}

HermiteExpansion HermiteExpansion::project(
    const std::function<double(std::span<const double>)>& f, int vars, int degree,
    int grid_nodes) {
  if (vars < 1 || vars > kMaxVars)
    throw std::invalid_argument("hermite oracle: vars must be in [1, 6]");
  if (degree < 0 || degree > kMaxDegree)
    throw std::invalid_argument("hermite oracle: degree must be in [0, 12]");
  if (grid_nodes <= 0) grid_nodes = degree + 9;
  double total_points = 1.0;
  for (int k = 0; k < vars; ++k) total_points *= grid_nodes;
  if (total_points > double(kMaxGridPoints))
    throw std::invalid_argument("hermite oracle: projection grid too large");

  HermiteExpansion ex;
  ex.vars_ = vars;
  ex.degree_ = degree;
  ex.build_index_set();

  const Quadrature gh = gauss_hermite_prob(grid_nodes);
  // He_k at each node, per degree
  std::vector<std::vector<double>> htab(grid_nodes, std::vector<double>(degree + 1));
  for (int q = 0; q < grid_nodes; ++q)
    for (int k = 0; k <= degree; ++k) htab[q][k] = hermite_poly(k, gh.x[q]);

  const size_t npts = size_t(total_points);
  std::vector<int> node(vars, 0);
  std::vector<double> t(vars), fvals(npts), wvals(npts);
  std::vector<size_t> nodeidx(npts * vars);
  for (size_t p = 0; p < npts; ++p) {
    double w = 1.0;
    for (int k = 0; k < vars; ++k) {
      t[k] = gh.x[node[k]];
      w *= gh.w[node[k]];
      nodeidx[p * vars + k] = node[k];
    }
    fvals[p] = f(t);
    wvals[p] = w;
    for (int k = 0; k < vars; ++k) {
      if (++node[k] < grid_nodes) break;
      node[k] = 0;
    }
  }

  for (size_t i = 0; i < ex.indices_.size(); ++i) {
    const auto& alpha = ex.indices_[i];
    double acc = 0.0;
    for (size_t p = 0; p < npts; ++p) {
      double h = 1.0;
      for (int k = 0; k < vars; ++k) h *= htab[nodeidx[p * vars + k]][alpha[k]];
      acc += wvals[p] * fvals[p] * h;
    }
    ex.coef_[i] = acc / index_factorial(alpha);
  }

  // truncation error on the grid, relative to ||f||_2
  double err2 = 0.0, norm2 = 0.0;
  for (size_t p = 0; p < npts; ++p) {
    double rec = 0.0;
    for (size_t i = 0; i < ex.indices_.size(); ++i) {
      const auto& alpha = ex.indices_[i];
      double h = 1.0;
      for (int k = 0; k < vars; ++k) h *= htab[nodeidx[p * vars + k]][alpha[k]];
      rec += ex.coef_[i] * h;
    }
    err2 += wvals[p] * (rec - fvals[p]) * (rec - fvals[p]);
    norm2 += wvals[p] * fvals[p] * fvals[p];
  }
  ex.trunc_err_ = (norm2 > 0.0) ? std::sqrt(err2 / norm2) : std::sqrt(err2);
  return ex;
}

HermiteExpansion HermiteExpansion::monomial(std::span<const int> alpha) {
  HermiteExpansion ex;
  ex.vars_ = int(alpha.size());
  int total = 0;
  for (int a : alpha) total += a;
  ex.degree_ = total;
  if (ex.vars_ < 1 || ex.vars_ > kMaxVars || total > kMaxDegree)
    throw std::invalid_argument("hermite oracle: monomial out of range");
  ex.build_index_set();
  std::vector<int> key(alpha.begin(), alpha.end());
  for (size_t i = 0; i < ex.indices_.size(); ++i) {
    if (ex.indices_[i] == key) {
      ex.coef_[i] = 1.0;
      return ex;
    }
  }
  throw std::logic_error("hermite oracle: index not found");
}

double HermiteExpansion::coefficient(std::span<const int> alpha) const {
  std::vector<int> key(alpha.begin(), alpha.end());
  for (size_t i = 0; i < indices_.size(); ++i)
    if (indices_[i] == key) return coef_[i];
  throw std::invalid_argument("hermite oracle: coefficient index out of range");
}

double HermiteExpansion::coefficient_or_zero(std::span<const int> alpha) const {
  std::vector<int> key(alpha.begin(), alpha.end());
  for (size_t i = 0; i < indices_.size(); ++i)
    if (indices_[i] == key) return coef_[i];
  return 0.0;
}

double HermiteExpansion::evaluate(std::span<const double> t) const {
  double acc = 0.0;
  for (size_t i = 0; i < indices_.size(); ++i) {
    double h = coef_[i];
    if (h == 0.0) continue;
    for (int k = 0; k < vars_; ++k) h *= hermite_poly(indices_[i][k], t[k]);
    acc += h;
  }
  return acc;
}

HermiteExpansion HermiteExpansion::apply_resolvent() const {
  HermiteExpansion out = *this;
  for (size_t i = 0; i < indices_.size(); ++i)
    out.coef_[i] /= double(index_total(indices_[i]) + 1);
  return out;
}

namespace {

// Align two expansions (possibly over different variable counts) by
// embedding the smaller into the larger variable set (shared leading vars).
double paired_sum(const HermiteExpansion& f, const HermiteExpansion& g, bool resolvent);

}  // namespace

double HermiteExpansion::inner(const HermiteExpansion& f, const HermiteExpansion& g) {
  return paired_sum(f, g, false);
}

double HermiteExpansion::resolvent_bilinear(const HermiteExpansion& f,
                                            const HermiteExpansion& g) {
  return paired_sum(f, g, true);
}

namespace {

double paired_sum(const HermiteExpansion& f, const HermiteExpansion& g, bool resolvent) {
  // Indices over disjoint trailing variables pair only with zero entries,
  // so matching on the common prefix with zero tails is exact.
  const HermiteExpansion& big = (f.vars() >= g.vars()) ? f : g;
  const HermiteExpansion& small = (f.vars() >= g.vars()) ? g : f;
  double acc = 0.0;
  const int nv = small.vars();
  // iterate small's index set; look up in big with zero-padded tail
  std::vector<int> cur(nv, 0);
  std::function<void(int, int)> walk = [&](int pos, int budget) {
    if (pos == nv) {
      double cs = small.coefficient(cur);
      if (cs == 0.0) return;
      std::vector<int> padded(big.vars(), 0);
      for (int k = 0; k < nv; ++k) padded[k] = cur[k];
      int total = 0;
      double fact = 1.0;
      for (int a : padded) {
        total += a;
        for (int k = 2; k <= a; ++k) fact *= k;
      }
      const double cb = big.coefficient_or_zero(padded);
      if (cb == 0.0) return;
      double term = cs * cb * fact;
      if (resolvent) term /= double(total + 1);
      acc += term;
      return;
    }
    for (int a = 0; a <= budget; ++a) {
      cur[pos] = a;
      walk(pos + 1, budget - a);
    }
    cur[pos] = 0;
  };
  walk(0, small.degree());
  return acc;
}

}  // namespace

double HermiteExpansion::mean() const {
  std::vector<int> zero(vars_, 0);
  return coefficient(zero);
}

double HermiteExpansion::l2_norm() const {
  double acc = 0.0;
  for (size_t i = 0; i < indices_.size(); ++i)
    acc += coef_[i] * coef_[i] * index_factorial(indices_[i]);
  return std::sqrt(acc);
}

double HermiteExpansion::lp_norm(double p, int grid_nodes) const {
  if (grid_nodes <= 0) grid_nodes = degree_ + 25;
  double total_points = 1.0;
  for (int k = 0; k < vars_; ++k) total_points *= grid_nodes;
  if (total_points > double(kMaxGridPoints))
    throw std::invalid_argument("hermite oracle: lp grid too large");
  const Quadrature gh = gauss_hermite_prob(grid_nodes);
  std::vector<int> node(vars_, 0);
  std::vector<double> t(vars_);
  double acc = 0.0;
  const size_t npts = size_t(total_points);
  for (size_t pidx = 0; pidx < npts; ++pidx) {
    double w = 1.0;
    for (int k = 0; k < vars_; ++k) {
      t[k] = gh.x[node[k]];
      w *= gh.w[node[k]];
    }
    acc += w * std::pow(std::abs(evaluate(t)), p);
    for (int k = 0; k < vars_; ++k) {
      if (++node[k] < grid_nodes) break;
      node[k] = 0;
    }
  }
  return std::pow(acc, 1.0 / p);
}

}  // namespace corrlab
