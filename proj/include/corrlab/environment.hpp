// Gaussian disorder on the torus edges: counter-based sampling, the smooth
// coefficient map a(.) with derivatives, and the Ornstein-Uhlenbeck coupling.
#pragma once

#include <cstdint>
#include <string>

#include "corrlab/lattice.hpp"

namespace corrlab {

// One normal draw fully determined by (seed, stream, index); workers can
// generate any subset of a field in any order and still agree bit-for-bit.
double counter_normal(uint64_t seed, uint64_t stream, uint64_t index);

// Raw counter-based generator block (Philox 4x32-10).
void philox4x32(uint64_t key, uint64_t ctr_hi, uint64_t ctr_lo, uint32_t out[4]);

// Stream id for the independent field paired with a primary sample in OU
// couplings. Keeps primary and fresh draws in disjoint counter spaces.
inline uint64_t fresh_stream(uint64_t sample_index) {
  return sample_index ^ 0x8000000000000000ull;
}

// a : R -> [a_min, a_max] subset of (0, inf), twice differentiable with
// bounded derivatives. Families: "tanh" (default) and "constant".
class CoefficientMap {
 public:
  static CoefficientMap tanh_family(double a_min, double a_max, double tau);
  static CoefficientMap constant(double value);

  double a(double t) const;
  double da(double t) const;
  double d2a(double t) const;

  double a_min() const { return a_min_; }
  double a_max() const { return a_max_; }
  double tau() const { return tau_; }
  double sup_da() const;   // sup |a'|
  double sup_d2a() const;  // sup |a''|
  const std::string& family() const { return family_; }

 private:
  std::string family_;
  double a_min_ = 0.0, a_max_ = 0.0, tau_ = 1.0;
};

struct Environment {
  TorusPtr torus;
  CoefficientMap map;
  EdgeField zeta;  // iid standard Gaussians
  EdgeField a;     // a(zeta), entrywise
  uint64_t seed = 0;
  uint64_t sample_index = 0;
};

// zeta(e) = counter_normal(seed, sample_index, e); a = a(zeta).
Environment sample_environment(const TorusPtr& torus, const CoefficientMap& map,
                               uint64_t seed, uint64_t sample_index);

EdgeField sample_gaussian_edges(const TorusPtr& torus, uint64_t seed, uint64_t stream);

// Copy with zeta(e) += h and a(e) recomputed; everything else untouched.
Environment perturb_edge(const Environment& env, int64_t edge, double h);

struct OUCoupling {
  EdgeField zeta_primary;
  EdgeField zeta_fresh;
  double s = 1.0;  // correlation parameter in [0, 1]
};

// s*zeta + sqrt(1-s^2)*zeta' entrywise; standard Gaussian marginals for all s.
EdgeField ou_interpolate(const OUCoupling& c);

// Environment carrying the coupled field (same map/torus, a recomputed).
Environment couple_environment(const Environment& env, const EdgeField& fresh, double s);

}  // namespace corrlab
