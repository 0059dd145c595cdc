// Discrete geometry and calculus on the d-dimensional periodic torus:
// sites, directed edges, gradient, divergence, elliptic operator.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace corrlab {

// Periodic box {0,...,L-1}^d. Site index is site-major with axis 0 fastest:
//   index(x) = x0 + L*x1 + L^2*x2 + ...
// Every edge is (base site, axis); edge index = site*d + axis. Both
// conventions are frozen so that seeded fields reproduce bit-identically.
class Torus {
 public:
  Torus(int dim, int side);

  int dim() const { return dim_; }
  int side() const { return side_; }
  int64_t sites() const { return sites_; }
  int64_t edges() const { return sites_ * dim_; }

  // step = +1 or -1 along the given axis, with wraparound.
  int64_t neighbor(int64_t site, int axis, int step) const {
    return neighbors_[2 * dim_ * site + 2 * axis + (step > 0 ? 0 : 1)];
  }

  int64_t edge_index(int64_t base, int axis) const { return base * dim_ + axis; }
  int64_t edge_base(int64_t e) const { return e / dim_; }
  int edge_axis(int64_t e) const { return static_cast<int>(e % dim_); }
  // endpoint of the edge (base + e_axis mod L)
  int64_t edge_tip(int64_t e) const {
    return neighbor(edge_base(e), edge_axis(e), +1);
  }

  void coords(int64_t site, int* out) const;
  int64_t site_at(std::span<const int> x) const;  // coordinates taken mod L

  // Euclidean distance from the origin in the wrapped metric
  // (each coordinate mapped to [-L/2, L/2)).
  double torus_dist(int64_t site) const;

 private:
  int dim_;
  int side_;
  int64_t sites_;
  std::vector<int64_t> strides_;
  std::vector<int32_t> neighbors_;  // 2*dim entries per site: +axis, -axis
};

using TorusPtr = std::shared_ptr<const Torus>;
TorusPtr make_torus(int dim, int side);

struct ScalarField {
  TorusPtr torus;
  std::vector<double> v;  // one value per site, in index order

  ScalarField() = default;
  explicit ScalarField(TorusPtr t) : torus(std::move(t)), v(torus->sites(), 0.0) {}
  double mean() const;
  void subtract_mean();
};

struct EdgeField {
  TorusPtr torus;
  std::vector<double> v;  // one value per edge, in index order

  EdgeField() = default;
  explicit EdgeField(TorusPtr t) : torus(std::move(t)), v(torus->edges(), 0.0) {}
};

// (grad f)(e) = f(tip) - f(base)
EdgeField gradient(const ScalarField& f);

// (div F)(x) = sum_i [F((x-e_i, i)) - F((x, i))], the formal adjoint of the
// gradient: sum_x (div F)(x) g(x) = sum_e F(e) (grad g)(e).
ScalarField divergence(const EdgeField& F);

// mu*u + div(a .* grad u). Rejects non-positive conductances.
ScalarField apply_elliptic(double mu, const EdgeField& a, const ScalarField& u);

// In-place fused version used by the solver hot loop (no validation).
void apply_elliptic_into(double mu, const EdgeField& a, const ScalarField& u,
                         ScalarField& out);

double dot(const ScalarField& a, const ScalarField& b);
double dot_edges(const EdgeField& a, const EdgeField& b);

bool all_finite(std::span<const double> v);

// Flat binary of 64-bit floats in index order plus a JSON sidecar header.
// save_field(f, "path") writes path.bin and path.json.
void save_field(const ScalarField& f, const std::string& basepath);
void save_field(const EdgeField& f, const std::string& basepath);
ScalarField load_scalar_field(const std::string& basepath);
EdgeField load_edge_field(const std::string& basepath);

}  // namespace corrlab
