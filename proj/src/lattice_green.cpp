#include "corrlab/lattice_green.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

#include "corrlab/quadrature.hpp"

namespace corrlab {

namespace {

// Uniform asymptotic series e^{-z} I_n(z) ~ (2 pi z)^{-1/2} sum_k (-1)^k c_k/(8z)^k,
// c_k = prod_{j=1..k} (4n^2 - (2j-1)^2) / k!. Used where it converges to
// machine precision; Miller's backward recurrence with rescaling otherwise.
double scaled_bessel_asymptotic(int n, double z) {
  const double mu = 4.0 * double(n) * double(n);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (8.0 * z * k);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * z);
}

bool asymptotic_ok(int n_max, double z) { return z >= 25.0 * (double(n_max) * n_max + 4.0); }

}  // namespace

std::vector<double> scaled_bessel_i(int n_max, double z) {
  if (z < 0.0) throw std::invalid_argument("scaled_bessel_i: z must be >= 0");
  std::vector<double> out(n_max + 1, 0.0);
  if (z == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (z < 1e-8) {
    // leading series terms suffice
    out[0] = std::exp(-z) * (1.0 + z * z / 4.0);
    double pw = 1.0;
    for (int n = 1; n <= n_max; ++n) {
      pw *= z / (2.0 * n);
      out[n] = std::exp(-z) * pw;
    }
    return out;
  }
  if (asymptotic_ok(n_max, z)) {
    for (int n = 0; n <= n_max; ++n) out[n] = scaled_bessel_asymptotic(n, z);
    return out;
  }

  // start order high enough that the seeded tail is below 1e-16 of I_0:
  // I_M / I_0 ~ exp(-M^2/(2z)) for M >> z requires M ~ sqrt(2 z ln(1/eps))
  const int M = n_max + 20 + int(9.0 * std::sqrt(z));
  double pk1 = 0.0;       // p_{k+1}
  double pk = 1e-300;     // p_k
  double sum = 0.0;       // p_0 + 2 sum_{k>=1} p_k, built as we descend
  for (int k = M; k >= 1; --k) {
    const double pkm1 = pk1 + (2.0 * k / z) * pk;
    sum += 2.0 * pk;  // accumulates 2*p_k for k = M..1
    if (k - 1 <= n_max) out[k - 1] = pkm1;
    pk1 = pk;
    pk = pkm1;
    if (std::abs(pk) > 1e260) {
      pk1 *= 1e-260;
      pk *= 1e-260;
      sum *= 1e-260;
      for (double& o : out) o *= 1e-260;
    }
  }
  sum += pk;  // p_0
  for (double& o : out) o /= sum;
  return out;
}

namespace {

struct GreenIntegrand {
  std::vector<double> A;
  std::vector<int> n;    // |x_j|
  int grad_axis = -1;    // -1: value; else forward difference along axis

  double order_max() const {
    int m = 0;
    for (int v : n) m = std::max(m, v);
    return double(m + 1);
  }

  double at_t(double t) const {
    double prod = 1.0;
    double diff = 0.0;
    for (size_t j = 0; j < A.size(); ++j) {
      const double z = 2.0 * A[j] * t;
      const int need = n[j] + (int(j) == grad_axis ? 1 : 0);
      const auto ib = scaled_bessel_i(need, z);
      if (int(j) == grad_axis) {
        // f(x_j + 1) - f(x_j); careful with |.| when x_j < 0 handled by caller
        diff = ib[need] - ib[n[j]];
      } else {
        prod *= ib[n[j]];
      }
    }
    return grad_axis >= 0 ? prod * diff : prod;
  }
};

double integrate_green(const GreenIntegrand& gi, int nodes) {
  double nmax = 0.0;
  for (int v : gi.n) nmax = std::max(nmax, double(v));
  double amin = gi.A[0];
  for (double a : gi.A) amin = std::min(amin, a);
  const double T = std::max(64.0, 3.0 * (nmax + 2.0) * (nmax + 2.0) / amin);

  const Quadrature rule = gauss_legendre(nodes);
  double total = 0.0;
  // geometric panels on [0, T]
  double lo = 0.0, hi = 1.0;
  while (lo < T) {
    hi = std::min(hi, T);
    for (size_t k = 0; k < rule.x.size(); ++k) {
      const double t = lo + 0.5 * (hi - lo) * (rule.x[k] + 1.0);
      total += 0.5 * (hi - lo) * rule.w[k] * gi.at_t(t);
    }
    lo = hi;
    hi = 2.0 * hi;
  }
  // tail: t = 1/u^2, smooth down to u = 0
  const double uT = 1.0 / std::sqrt(T);
  double u_hi = uT;
  for (int lev = 0; lev < 10; ++lev) {
    const double u_lo = (lev == 9) ? 0.0 : u_hi * 0.5;
    for (size_t k = 0; k < rule.x.size(); ++k) {
      const double u = u_lo + 0.5 * (u_hi - u_lo) * (rule.x[k] + 1.0);
      const double t = 1.0 / (u * u);
      total += 0.5 * (u_hi - u_lo) * rule.w[k] * gi.at_t(t) * 2.0 / (u * u * u);
    }
    u_hi = u_lo;
    if (u_hi == 0.0) break;
  }
  return total;
}

QuadResult green_quad(const GreenIntegrand& gi) {
  const double v1 = integrate_green(gi, 16);
  const double v2 = integrate_green(gi, 24);
  QuadResult r{v2, std::abs(v2 - v1)};
  if (r.err > std::max(1e-7 * std::abs(v2), 1e-11))
    throw std::runtime_error("lattice_green: quadrature refinement disagreement");
  return r;
}

}  // namespace

QuadResult lattice_green_inf(std::span<const double> A_diag, std::span<const int> x) {
  if (A_diag.size() != x.size() || A_diag.size() < 3)
    throw std::invalid_argument("lattice_green_inf: needs d >= 3 and matching sizes");
  for (double a : A_diag)
    if (!(a > 0.0)) throw std::invalid_argument("lattice_green_inf: A must be positive");
  GreenIntegrand gi;
  gi.A.assign(A_diag.begin(), A_diag.end());
  for (int c : x) gi.n.push_back(std::abs(c));
  return green_quad(gi);
}

namespace {

// Shared panel scheme: geometric panels on [0, T], then the substitution
// t = 1/u^2 for the algebraic tail (smooth down to u = 0).
template <typename F>
double integrate_panels(F&& f, double T, int nodes) {
  const Quadrature rule = gauss_legendre(nodes);
  double total = 0.0;
  double lo = 0.0, hi = 1.0;
  while (lo < T) {
    hi = std::min(hi, T);
    for (size_t k = 0; k < rule.x.size(); ++k) {
      const double t = lo + 0.5 * (hi - lo) * (rule.x[k] + 1.0);
      total += 0.5 * (hi - lo) * rule.w[k] * f(t);
    }
    lo = hi;
    hi = 2.0 * hi;
  }
  const double uT = 1.0 / std::sqrt(T);
  double u_hi = uT;
  for (int lev = 0; lev < 10; ++lev) {
    const double u_lo = (lev == 9) ? 0.0 : u_hi * 0.5;
    for (size_t k = 0; k < rule.x.size(); ++k) {
      const double u = u_lo + 0.5 * (u_hi - u_lo) * (rule.x[k] + 1.0);
      const double t = 1.0 / (u * u);
      total += 0.5 * (u_hi - u_lo) * rule.w[k] * f(t) * 2.0 / (u * u * u);
    }
    u_hi = u_lo;
    if (u_hi == 0.0) break;
  }
  return total;
}

}  // namespace

QuadResult lattice_kernel_inf(std::span<const double> Q, double ah,
                              std::span<const int> x) {
  const int d = int(x.size());
  if (d != 3) throw std::invalid_argument("lattice_kernel_inf: d = 3 only");
  if (int(Q.size()) != d * d) throw std::invalid_argument("lattice_kernel_inf: Q must be d x d");
  if (!(ah > 0.0)) throw std::invalid_argument("lattice_kernel_inf: ah must be > 0");

  // sig_j sig_k* = e^{i(p_j - p_k)} - e^{i p_j} - e^{-i p_k} + 1 turns the
  // multiplier into a finite sum of shifted heat kernels:
  //   P(x) = ah^{-2} sum_jk Q_jk int_0^inf t [ H_t(x - e_j + e_k)
  //            - H_t(x - e_j) - H_t(x + e_k) + H_t(x) ] dt.
  int n_max = 0;
  for (int c : x) n_max = std::max(n_max, std::abs(c));
  n_max += 1;

  const auto bracket_at = [&](double t) {
    const auto ib = scaled_bessel_i(n_max + 1, 2.0 * t);
    const auto H = [&](int v0, int v1, int v2) {
      return ib[std::abs(v0)] * ib[std::abs(v1)] * ib[std::abs(v2)];
    };
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        const double q = Q[j * d + k];
        if (q == 0.0) continue;
        int a[3] = {x[0], x[1], x[2]};
        int b[3] = {x[0], x[1], x[2]};
        int c[3] = {x[0], x[1], x[2]};
        a[j] -= 1;
        a[k] += 1;  // x - e_j + e_k
        b[j] -= 1;  // x - e_j
        c[k] += 1;  // x + e_k
        acc += q * (H(a[0], a[1], a[2]) - H(b[0], b[1], b[2]) - H(c[0], c[1], c[2]) +
                    H(x[0], x[1], x[2]));
      }
    }
    return t * acc;
  };

  const double T = std::max(64.0, 3.0 * double(n_max + 2) * double(n_max + 2));
  const double v1 = integrate_panels(bracket_at, T, 16);
  const double v2 = integrate_panels(bracket_at, T, 24);
  QuadResult r{v2 / (ah * ah), std::abs(v2 - v1) / (ah * ah)};
  if (r.err > std::max(1e-6 * std::abs(r.value), 1e-11))
    throw std::runtime_error("lattice_kernel_inf: quadrature refinement disagreement");
  return r;
}

QuadResult lattice_green_grad_inf(std::span<const double> A_diag, std::span<const int> x,
                                  int axis) {
  // I_n is even in n, so the difference I_{|x+1|} - I_{|x|} must be formed
  // on signed indices: handle x_axis < 0 via |x_axis + 1| explicitly.
  if (axis < 0 || axis >= int(x.size()))
    throw std::invalid_argument("lattice_green_grad_inf: bad axis");
  GreenIntegrand gi;
  gi.A.assign(A_diag.begin(), A_diag.end());
  for (int c : x) gi.n.push_back(std::abs(c));
  const int xa = x[axis];
  if (std::abs(xa + 1) == gi.n[axis] + 1) {
    gi.grad_axis = axis;
    return green_quad(gi);
  }
  // |x_a + 1| != |x_a| + 1 (negative side): fall back to two evaluations
  std::vector<int> xp(x.begin(), x.end());
  xp[axis] += 1;
  const QuadResult g1 = lattice_green_inf(A_diag, xp);
  const QuadResult g0 = lattice_green_inf(A_diag, x);
  return {g1.value - g0.value, g1.err + g0.err};
}

namespace {

std::mutex fftw_mutex;

}  // namespace

std::vector<double> torus_multiplier_table(
    const Torus& torus, const std::function<double(std::span<const int>)>& multiplier) {
  const int d = torus.dim();
  const int L = torus.side();
  const int64_t n = torus.sites();
  fftw_complex* buf;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    buf = fftw_alloc_complex(size_t(n));
    std::vector<int> dims(d, L);
    plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  std::vector<int> k(d);
  for (int64_t s = 0; s < n; ++s) {
    torus.coords(s, k.data());
    const double m = (s == 0) ? 0.0 : multiplier(k);
    buf[s][0] = m;
    buf[s][1] = 0.0;
  }
  fftw_execute(plan);
  std::vector<double> out(static_cast<size_t>(n));
  const double norm = 1.0 / double(n);
  for (int64_t s = 0; s < n; ++s) out[s] = buf[s][0] * norm;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(plan);
    fftw_free(buf);
  }
  return out;
}

std::vector<double> torus_autocorrelation(const ScalarField& f) {
  const Torus& torus = *f.torus;
  const int d = torus.dim();
  const int L = torus.side();
  const int64_t n = torus.sites();
  fftw_complex* buf;
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    buf = fftw_alloc_complex(size_t(n));
    std::vector<int> dims(d, L);
    fwd = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (int64_t s = 0; s < n; ++s) {
    buf[s][0] = f.v[s];
    buf[s][1] = 0.0;
  }
  fftw_execute(fwd);
  for (int64_t s = 0; s < n; ++s) {
    buf[s][0] = buf[s][0] * buf[s][0] + buf[s][1] * buf[s][1];
    buf[s][1] = 0.0;
  }
  fftw_execute(bwd);
  std::vector<double> out(static_cast<size_t>(n));
  const double norm = 1.0 / (double(n) * double(n));
  for (int64_t s = 0; s < n; ++s) out[s] = buf[s][0] * norm;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf);
  }
  return out;
}

namespace {

double lattice_symbol(std::span<const int> k, int L) {
  double s = 0.0;
  for (int kj : k) s += 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * kj / L));
  return s;
}

}  // namespace

std::vector<double> torus_green_table(double ah, const Torus& torus) {
  if (!(ah > 0.0)) throw std::invalid_argument("torus_green_table: ah must be > 0");
  const int L = torus.side();
  return torus_multiplier_table(
      torus, [&](std::span<const int> k) { return 1.0 / (ah * lattice_symbol(k, L)); });
}

std::vector<double> torus_kernel_table(std::span<const double> Q_rowmajor, double ah,
                                       const Torus& torus) {
  const int d = torus.dim();
  if (int(Q_rowmajor.size()) != d * d)
    throw std::invalid_argument("torus_kernel_table: Q must be d x d");
  const int L = torus.side();
  return torus_multiplier_table(torus, [&](std::span<const int> k) {
    std::vector<std::complex<double>> w(d);
    for (int j = 0; j < d; ++j) {
      const double th = 2.0 * std::numbers::pi * k[j] / L;
      w[j] = std::complex<double>(std::cos(th) - 1.0, std::sin(th));
    }
    std::complex<double> form = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) form += w[i] * std::conj(w[j]) * Q_rowmajor[i * d + j];
    const double s = ah * lattice_symbol(k, L);
    return form.real() / (s * s);
  });
}

}  // namespace corrlab
