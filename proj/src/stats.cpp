#include "corrlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "corrlab/environment.hpp"

namespace corrlab {

MeanErr mean_stderr(std::span<const double> samples) {
  MeanErr out;
  out.n = int64_t(samples.size());
  if (out.n == 0) return out;
  double m = 0.0;
  for (double x : samples) m += x;
  m /= double(out.n);
  out.mean = m;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - m) * (x - m);
    out.stderr_ = std::sqrt(ss / (double(out.n) * double(out.n - 1)));
  }
  return out;
}

double sample_variance(std::span<const double> samples) {
  if (samples.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : samples) m += x;
  m /= double(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - m) * (x - m);
  return ss / double(samples.size() - 1);
}

double excess_kurtosis(std::span<const double> samples) {
  double m = 0.0;
  for (double x : samples) m += x;
  m /= double(samples.size());
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d = x - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= double(samples.size());
  m4 /= double(samples.size());
  return m4 / (m2 * m2) - 3.0;
}

namespace {

struct LinFit {
  double slope, intercept, r2;
};

LinFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  LinFit f{};
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0.0;
  const double ymean = sy / n;
  double ss_tot = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double pred = f.intercept + f.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
  }
  f.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace

DecayFit decay_fit(std::span<const double> radii, std::span<const double> values,
                   double r_min, double r_max, bool strict, int bootstrap,
                   uint64_t seed) {
  if (radii.size() != values.size())
    throw std::invalid_argument("decay_fit: radii/values size mismatch");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] < r_min || radii[i] > r_max) continue;
    double v = values[i];
    if (strict) {
      if (!(v > 0.0)) throw std::invalid_argument("decay_fit: non-positive value in strict mode");
    } else {
      v = std::abs(v);
      if (v == 0.0) continue;
    }
    xs.push_back(std::log(radii[i]));
    ys.push_back(std::log(v));
  }
  if (xs.size() < 4) throw std::invalid_argument("decay_fit: needs at least 4 radii in range");

  // A constant sequence has slope 0 but an ill-conditioned R^2; handle it.
  DecayFit out;
  out.points = int(xs.size());
  const LinFit f = least_squares(xs, ys);
  out.exponent = f.slope;
  out.intercept = f.intercept;
  out.r2 = f.r2;

  if (bootstrap > 1) {
    std::vector<double> slopes(bootstrap);
    const size_t n = xs.size();
    std::vector<double> bx(n), by(n);
    for (int b = 0; b < bootstrap; ++b) {
      for (size_t i = 0; i < n; ++i) {
        uint32_t r[4];
        philox4x32(seed, uint64_t(b), uint64_t(i), r);
        const size_t pick = size_t(r[0]) % n;
        bx[i] = xs[pick];
        by[i] = ys[pick];
      }
      // Degenerate resamples (all one point) give NaN; reuse full-fit slope.
      const LinFit bf = least_squares(bx, by);
      slopes[b] = std::isfinite(bf.slope) ? bf.slope : f.slope;
    }
    std::sort(slopes.begin(), slopes.end());
    out.ci_lo = slopes[size_t(0.025 * (bootstrap - 1))];
    out.ci_hi = slopes[size_t(0.975 * (bootstrap - 1))];
  } else {
    out.ci_lo = out.ci_hi = f.slope;
  }
  return out;
}

}  // namespace corrlab
