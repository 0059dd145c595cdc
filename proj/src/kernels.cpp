#include "corrlab/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "corrlab/lattice_green.hpp"
#include "corrlab/quadrature.hpp"

namespace corrlab {

namespace {

constexpr double kPi = std::numbers::pi;

void check_diag(std::span<const double> A) {
  if (A.size() < 3) throw std::invalid_argument("kernels: d >= 3 required");
  for (double a : A)
    if (!(a > 0.0)) throw std::invalid_argument("kernels: A must be positive definite");
}

double det_diag(std::span<const double> A) {
  double d = 1.0;
  for (double a : A) d *= a;
  return d;
}

double quad_form_inv(std::span<const double> A, std::span<const double> x) {
  double q = 0.0;
  for (size_t j = 0; j < A.size(); ++j) q += x[j] * x[j] / A[j];
  return q;
}

}  // namespace

double symbol(std::span<const double> A_diag, std::span<const double> p) {
  double s = 0.0;
  for (size_t j = 0; j < A_diag.size(); ++j) s += 2.0 * A_diag[j] * (1.0 - std::cos(p[j]));
  return s;
}

double sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

double continuum_green(std::span<const double> A_diag, std::span<const double> x) {
  check_diag(A_diag);
  const int d = int(A_diag.size());
  const double q = quad_form_inv(A_diag, x);
  if (!(q > 0.0)) throw std::invalid_argument("continuum_green: x must be nonzero");
  // Normalization uses sqrt(det A): rescaling y_j = x_j / sqrt(A_j) maps
  // -div(A grad) to -Laplace with volume factor sqrt(det A).
  return 1.0 / ((d - 2) * sphere_area(d) * std::sqrt(det_diag(A_diag)) *
                std::pow(q, 0.5 * (d - 2)));
}

std::vector<double> continuum_green_grad(std::span<const double> A_diag,
                                         std::span<const double> x) {
  check_diag(A_diag);
  const int d = int(A_diag.size());
  const double q = quad_form_inv(A_diag, x);
  if (!(q > 0.0)) throw std::invalid_argument("continuum_green_grad: x must be nonzero");
  const double c = sphere_area(d) * std::sqrt(det_diag(A_diag)) * std::pow(q, 0.5 * d);
  std::vector<double> g(d);
  for (int k = 0; k < d; ++k) g[k] = -(x[k] / A_diag[k]) / c;
  return g;
}

double kernel_k_closed(std::span<const double> Q, std::span<const double> A,
                       std::span<const double> x) {
  check_diag(A);
  const int d = int(A.size());
  if (d != 3) throw std::invalid_argument("kernel_k_closed: implemented for d = 3");
  if (int(Q.size()) != d * d) throw std::invalid_argument("kernel_k_closed: Q must be d x d");
  const double q = quad_form_inv(A, x);
  if (!(q > 0.0)) throw std::invalid_argument("kernel_k_closed: x must be nonzero");
  // Heat-kernel representation of 1/(p.Ap)^2 reduces the transform to two
  // Gamma integrals:
  //   K(x) = (det A)^{-1/2} / (8 pi) * [ tr(Q A^{-1}) / sqrt(q)
  //                                      - (x.A^{-1} Q A^{-1} x) / q^{3/2} ].
  double alpha = 0.0;
  for (int j = 0; j < d; ++j) alpha += Q[j * d + j] / A[j];
  double beta = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) beta += (x[i] / A[i]) * Q[i * d + j] * (x[j] / A[j]);
  return (alpha / std::sqrt(q) - beta / (q * std::sqrt(q))) /
         (8.0 * kPi * std::sqrt(det_diag(A)));
}

namespace {

// Regularized synthesis at one epsilon: the radial integral is exact,
//   K_eps(x) = (2pi)^{-3} (sqrt(pi)/(2 sqrt(eps)))
//              int_{S^2} m(w) exp(-(w.x)^2/(4 eps)) dsigma(w),
// and the sphere integral is done in coordinates aligned with x, with
// panels graded towards the great circle w.x = 0 where the Gaussian factor
// concentrates.
double kernel_k_eps(std::span<const double> Q, std::span<const double> A,
                    std::span<const double> x, double eps) {
  const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  const double r = std::sqrt(r2);
  // orthonormal frame (e, u, v) with e = x/|x|
  double e[3] = {x[0] / r, x[1] / r, x[2] / r};
  double u[3];
  if (std::abs(e[0]) < 0.9) {
    u[0] = 0.0;
    u[1] = -e[2];
    u[2] = e[1];
  } else {
    u[0] = -e[2];
    u[1] = 0.0;
    u[2] = e[0];
  }
  const double un = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  for (double& c : u) c /= un;
  double v[3] = {e[1] * u[2] - e[2] * u[1], e[2] * u[0] - e[0] * u[2],
                 e[0] * u[1] - e[1] * u[0]};

  const auto m = [&](double w0, double w1, double w2) {
    const double w[3] = {w0, w1, w2};
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
      den += A[i] * w[i] * w[i];
      for (int j = 0; j < 3; ++j) num += w[i] * Q[i * 3 + j] * w[j];
    }
    return num / (den * den);
  };

  const Quadrature gl = gauss_legendre(16);
  const int nphi = 48;
  const double width = std::min(1.0, 2.0 * std::sqrt(eps) / r);

  // graded panel edges in mu = cos(theta): 0, width, 2w, 4w, ..., 1
  std::vector<double> edges{0.0};
  double wedge = width;
  while (wedge < 1.0) {
    edges.push_back(wedge);
    wedge *= 2.0;
  }
  edges.push_back(1.0);

  double sphere_sum = 0.0;
  for (size_t pi_ = 0; pi_ + 1 < edges.size(); ++pi_) {
    for (int side = -1; side <= 1; side += 2) {
      const double lo = edges[pi_], hi = edges[pi_ + 1];
      for (size_t k = 0; k < gl.x.size(); ++k) {
        const double mu = side * (lo + 0.5 * (hi - lo) * (gl.x[k] + 1.0));
        const double smu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        const double damp = std::exp(-mu * mu * r2 / (4.0 * eps));
        if (damp == 0.0) continue;
        double phi_sum = 0.0;
        for (int iphi = 0; iphi < nphi; ++iphi) {
          const double phi = 2.0 * kPi * (iphi + 0.5) / nphi;
          const double cu = std::cos(phi), sv = std::sin(phi);
          const double w0 = mu * e[0] + smu * (cu * u[0] + sv * v[0]);
          const double w1 = mu * e[1] + smu * (cu * u[1] + sv * v[1]);
          const double w2 = mu * e[2] + smu * (cu * u[2] + sv * v[2]);
          phi_sum += m(w0, w1, w2);
        }
        phi_sum *= 2.0 * kPi / nphi;
        sphere_sum += 0.5 * (hi - lo) * gl.w[k] * damp * phi_sum;
      }
    }
  }
  return sphere_sum * std::sqrt(kPi / eps) * 0.5 / (8.0 * kPi * kPi * kPi);
}

// Neville extrapolation to 0 of (eps_i, v_i).
double neville_at_zero(std::span<const double> xs, std::span<const double> vs) {
  std::vector<double> p(vs.begin(), vs.end());
  const int n = int(xs.size());
  for (int lev = 1; lev < n; ++lev) {
    for (int i = 0; i + lev < n; ++i) {
      p[i] = (xs[i + lev] * p[i] - xs[i] * p[i + 1]) / (xs[i + lev] - xs[i]);
    }
  }
  return p[0];
}

}  // namespace

KernelSynthesis kernel_k_fourier(std::span<const double> Q, std::span<const double> A,
                                 std::span<const double> x,
                                 std::span<const double> eps_grid) {
  check_diag(A);
  if (A.size() != 3) throw std::invalid_argument("kernel_k_fourier: implemented for d = 3");
  const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  if (!(r2 > 0.0)) throw std::invalid_argument("kernel_k_fourier: x must be nonzero");
  KernelSynthesis out;
  if (eps_grid.empty()) {
    out.eps = {1e-2, 1e-3, 1e-4};
  } else {
    out.eps.assign(eps_grid.begin(), eps_grid.end());
  }
  for (double eps : out.eps) out.values.push_back(kernel_k_eps(Q, A, x, eps));
  out.value = neville_at_zero(out.eps, out.values);
  if (out.values.size() >= 2) {
    // compare against dropping the coarsest point
    std::vector<double> xs(out.eps.begin() + 1, out.eps.end());
    std::vector<double> vs(out.values.begin() + 1, out.values.end());
    out.err = std::abs(out.value - neville_at_zero(xs, vs));
  }
  return out;
}

double kernel_k(std::span<const double> Q, std::span<const double> A,
                std::span<const double> x, double tol) {
  const double closed = kernel_k_closed(Q, A, x);
  const KernelSynthesis syn = kernel_k_fourier(Q, A, x);
  const double scale = std::max(std::abs(closed), 1e-300);
  if (std::abs(closed - syn.value) > tol * scale)
    throw std::runtime_error("kernel_k: closed-form and Fourier synthesis disagree");
  return closed;
}

namespace {

// Quasi-uniform deterministic sphere grid (Fibonacci lattice).
std::vector<std::array<double, 3>> fibonacci_sphere(int n) {
  std::vector<std::array<double, 3>> pts(n);
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    pts[i] = {rho * std::cos(ga * i), rho * std::sin(ga * i), z};
  }
  return pts;
}

struct NelderMead {
  int dim;
  std::function<double(std::span<const double>)> f;
  int max_iter = 4000;
  double tol = 1e-12;

  // returns best point; fills best value and evaluation count. The simplex
  // seed scales with the start point so the search is scale-covariant.
  std::vector<double> minimize(std::vector<double> x0, double step, double* fbest,
                               int* evals) {
    const int n = dim;
    double scale0 = 0.0;
    for (double c : x0) scale0 = std::max(scale0, std::abs(c));
    if (scale0 == 0.0) scale0 = 1.0;
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (int i = 0; i < n; ++i)
      pts[i + 1][i] += step * std::max(std::abs(x0[i]), 0.25 * scale0);
    std::vector<double> fv(n + 1);
    for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]), ++*evals;

    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    for (int it = 0; it < max_iter; ++it) {
      // order
      std::vector<int> idx(n + 1);
      for (int i = 0; i <= n; ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
      std::vector<std::vector<double>> sp(n + 1);
      std::vector<double> sf(n + 1);
      for (int i = 0; i <= n; ++i) {
        sp[i] = pts[idx[i]];
        sf[i] = fv[idx[i]];
      }
      pts = sp;
      fv = sf;
      if (fv[n] - fv[0] < tol * (1.0 + std::abs(fv[0]))) break;

      for (int j = 0; j < n; ++j) {
        centroid[j] = 0.0;
        for (int i = 0; i < n; ++i) centroid[j] += pts[i][j];
        centroid[j] /= n;
      }
      for (int j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - pts[n][j]);
      const double fr = f(xr);
      ++*evals;
      if (fr < fv[0]) {
        for (int j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - pts[n][j]);
        const double fe = f(xe);
        ++*evals;
        if (fe < fr) {
          pts[n] = xe;
          fv[n] = fe;
        } else {
          pts[n] = xr;
          fv[n] = fr;
        }
      } else if (fr < fv[n - 1]) {
        pts[n] = xr;
        fv[n] = fr;
      } else {
        for (int j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (pts[n][j] - centroid[j]);
        const double fc = f(xc);
        ++*evals;
        if (fc < fv[n]) {
          pts[n] = xc;
          fv[n] = fc;
        } else {
          for (int i = 1; i <= n; ++i) {
            for (int j = 0; j < n; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
            fv[i] = f(pts[i]);
            ++*evals;
          }
        }
      }
    }
    int best = 0;
    for (int i = 1; i <= n; ++i)
      if (fv[i] < fv[best]) best = i;
    *fbest = fv[best];
    return pts[best];
  }
};

}  // namespace

GffDefect gff_defect(std::span<const double> Q, std::span<const double> A,
                     int sphere_points) {
  check_diag(A);
  if (A.size() != 3) throw std::invalid_argument("gff_defect: implemented for d = 3");
  if (int(Q.size()) != 9) throw std::invalid_argument("gff_defect: Q must be 3 x 3");
  double trQ = Q[0] + Q[4] + Q[8];
  if (!(trQ > 0.0)) throw std::invalid_argument("gff_defect: Q must be PSD nonzero");

  const auto grid = fibonacci_sphere(sphere_points);
  // Precompute the fixed part (p.Qp)/(p.Ap)^2 on the grid.
  std::vector<double> mval(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& w = grid[i];
    double num = 0.0, den = 0.0;
    for (int a = 0; a < 3; ++a) {
      den += A[a] * w[a] * w[a];
      for (int b = 0; b < 3; ++b) num += w[a] * Q[a * 3 + b] * w[b];
    }
    mval[i] = num / (den * den);
  }

  // B = L L^T through its 6 lower-triangular entries.
  const auto unpack = [](std::span<const double> th, double B[3][3]) {
    const double l[3][3] = {{th[0], 0, 0}, {th[1], th[2], 0}, {th[3], th[4], th[5]}};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += l[i][k] * l[j][k];
        B[i][j] = s;
      }
  };

  int evals = 0;
  const auto objective = [&](std::span<const double> th) {
    double B[3][3];
    unpack(th, B);
    double worst = 0.0;
    for (size_t i = 0; i < grid.size(); ++i) {
      const auto& w = grid[i];
      double pBp = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) pBp += w[a] * B[a][b] * w[b];
      worst = std::max(worst, std::abs(mval[i] * pBp - 1.0));
    }
    return worst;
  };

  // start from the isotropic factorization guess B = (3 <A^2> / tr Q) Id
  double a2 = std::cbrt(A[0] * A[1] * A[2]);
  const double scale = std::sqrt(3.0 * a2 * a2 / trQ);
  std::vector<double> theta0 = {scale, 0.0, scale, 0.0, 0.0, scale};

  GffDefect out;
  NelderMead nm{6, objective};
  double fbest = 0.0;
  auto best = nm.minimize(theta0, 0.25, &fbest, &evals);
  // one refinement restart from the found point
  auto best2 = nm.minimize(best, 0.05, &fbest, &evals);
  out.defect = fbest;
  out.evaluations = evals;
  out.converged = true;
  double B[3][3];
  unpack(best2, B);
  out.B.resize(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.B[i * 3 + j] = B[i][j];
  if (!std::isfinite(out.defect)) {
    out.converged = false;
    throw std::runtime_error("gff_defect: optimizer failed to converge");
  }
  return out;
}

DiscreteContinuumReport discrete_vs_continuum_report(std::span<const double> A_diag,
                                                     int axis, int n_min, int n_max) {
  check_diag(A_diag);
  const int d = int(A_diag.size());
  DiscreteContinuumReport rep;
  std::vector<double> radii, diffs;
  for (int n = n_min; n <= n_max; ++n) {
    std::vector<int> x(d, 0);
    x[axis] = n;
    const QuadResult disc = lattice_green_grad_inf(A_diag, x, axis);
    std::vector<double> xd(d, 0.0);
    xd[axis] = n;
    const double cont = continuum_green_grad(A_diag, xd)[axis];
    DiscreteContinuumRow row;
    row.r = n;
    row.discrete = disc.value;
    row.continuum = cont;
    row.diff = disc.value - cont;
    row.scaled = std::abs(row.diff) * std::pow(double(n), double(d));
    rep.rows.push_back(row);
    radii.push_back(n);
    diffs.push_back(std::abs(row.diff));
  }
  rep.fit = decay_fit(radii, diffs, n_min, n_max, /*strict=*/false);
  double lo = rep.rows[0].scaled, hi = rep.rows[0].scaled;
  for (const auto& row : rep.rows) {
    lo = std::min(lo, row.scaled);
    hi = std::max(hi, row.scaled);
  }
  rep.scaled_ratio = (lo > 0.0) ? hi / lo : 0.0;
  return rep;
}

}  // namespace corrlab
