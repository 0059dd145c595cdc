#include "corrlab/environment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace corrlab {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(uint32_t ctr[4], const uint32_t key[2]) {
  const uint64_t p0 = uint64_t(kPhiloxM0) * ctr[0];
  const uint64_t p1 = uint64_t(kPhiloxM1) * ctr[2];
  const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
  const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
  ctr[0] = hi1 ^ ctr[1] ^ key[0];
  ctr[1] = lo1;
  ctr[2] = hi0 ^ ctr[3] ^ key[1];
  ctr[3] = lo0;
}

}  // namespace

void philox4x32(uint64_t key, uint64_t ctr_hi, uint64_t ctr_lo, uint32_t out[4]) {
  uint32_t k[2] = {uint32_t(key), uint32_t(key >> 32)};
  uint32_t c[4] = {uint32_t(ctr_lo), uint32_t(ctr_lo >> 32), uint32_t(ctr_hi),
                   uint32_t(ctr_hi >> 32)};
  for (int round = 0; round < 10; ++round) {
    philox_round(c, k);
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  out[0] = c[0];
  out[1] = c[1];
  out[2] = c[2];
  out[3] = c[3];
}

double counter_normal(uint64_t seed, uint64_t stream, uint64_t index) {
  uint32_t r[4];
  philox4x32(seed, stream, index, r);
  // Box-Muller, cosine branch. u1 in (0,1], u2 in [0,1).
  const uint64_t x1 = (uint64_t(r[0]) << 32) | r[1];
  const uint64_t x2 = (uint64_t(r[2]) << 32) | r[3];
  const double u1 = (double(x1 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = double(x2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CoefficientMap CoefficientMap::tanh_family(double a_min, double a_max, double tau) {
  if (!(a_min > 0.0)) throw std::invalid_argument("coefficient map: a_min must be > 0");
  if (!(a_max > a_min)) throw std::invalid_argument("coefficient map: a_max must be > a_min");
  if (!(tau > 0.0)) throw std::invalid_argument("coefficient map: tau must be > 0");
  CoefficientMap m;
  m.family_ = "tanh";
  m.a_min_ = a_min;
  m.a_max_ = a_max;
  m.tau_ = tau;
  return m;
}

CoefficientMap CoefficientMap::constant(double value) {
  if (!(value > 0.0)) throw std::invalid_argument("coefficient map: value must be > 0");
  CoefficientMap m;
  m.family_ = "constant";
  m.a_min_ = value;
  m.a_max_ = value;
  return m;
}

double CoefficientMap::a(double t) const {
  if (family_ == "constant") return a_min_;
  return a_min_ + (a_max_ - a_min_) * 0.5 * (1.0 + std::tanh(t / tau_));
}

double CoefficientMap::da(double t) const {
  if (family_ == "constant") return 0.0;
  const double c = std::cosh(t / tau_);
  return (a_max_ - a_min_) / (2.0 * tau_ * c * c);
}

double CoefficientMap::d2a(double t) const {
  if (family_ == "constant") return 0.0;
  const double u = t / tau_;
  const double sech2 = 1.0 / (std::cosh(u) * std::cosh(u));
  return -(a_max_ - a_min_) / (tau_ * tau_) * sech2 * std::tanh(u);
}

double CoefficientMap::sup_da() const {
  if (family_ == "constant") return 0.0;
  return (a_max_ - a_min_) / (2.0 * tau_);  // attained at t = 0
}

double CoefficientMap::sup_d2a() const {
  if (family_ == "constant") return 0.0;
  // max of sech^2(u)|tanh(u)| is 2/(3*sqrt(3)), at tanh^2(u) = 1/3
  return (a_max_ - a_min_) / (tau_ * tau_) * 2.0 / (3.0 * std::sqrt(3.0));
}

EdgeField sample_gaussian_edges(const TorusPtr& torus, uint64_t seed, uint64_t stream) {
  EdgeField z(torus);
  const int64_t n = torus->edges();
  for (int64_t e = 0; e < n; ++e) z.v[e] = counter_normal(seed, stream, uint64_t(e));
  return z;
}

Environment sample_environment(const TorusPtr& torus, const CoefficientMap& map,
                               uint64_t seed, uint64_t sample_index) {
  Environment env;
  env.torus = torus;
  env.map = map;
  env.seed = seed;
  env.sample_index = sample_index;
  env.zeta = sample_gaussian_edges(torus, seed, sample_index);
  env.a = EdgeField(torus);
  for (int64_t e = 0; e < torus->edges(); ++e) env.a.v[e] = map.a(env.zeta.v[e]);
  return env;
}

Environment perturb_edge(const Environment& env, int64_t edge, double h) {
  if (!std::isfinite(h)) throw std::invalid_argument("perturb_edge: h must be finite");
  Environment out = env;
  out.zeta.v[edge] += h;
  out.a.v[edge] = env.map.a(out.zeta.v[edge]);
  return out;
}

EdgeField ou_interpolate(const OUCoupling& c) {
  if (!(c.s >= 0.0 && c.s <= 1.0))
    throw std::invalid_argument("ou_interpolate: s must be in [0, 1]");
  if (c.s == 1.0) return c.zeta_primary;
  if (c.s == 0.0) return c.zeta_fresh;
  EdgeField out(c.zeta_primary.torus);
  const double t = std::sqrt(1.0 - c.s * c.s);
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = c.s * c.zeta_primary.v[i] + t * c.zeta_fresh.v[i];
  return out;
}

Environment couple_environment(const Environment& env, const EdgeField& fresh, double s) {
  Environment out;
  out.torus = env.torus;
  out.map = env.map;
  out.seed = env.seed;
  out.sample_index = env.sample_index;
  out.zeta = ou_interpolate({env.zeta, fresh, s});
  out.a = EdgeField(env.torus);
  for (int64_t e = 0; e < env.torus->edges(); ++e) out.a.v[e] = env.map.a(out.zeta.v[e]);
  return out;
}

}  // namespace corrlab
