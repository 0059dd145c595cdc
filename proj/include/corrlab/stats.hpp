// Sample statistics and the log-log decay fit used by the asymptotic checks.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace corrlab {

struct MeanErr {
  double mean = 0.0;
  double stderr_ = 0.0;  // CLT standard error of the mean
  int64_t n = 0;
};

MeanErr mean_stderr(std::span<const double> samples);

double sample_variance(std::span<const double> samples);

// Excess-kurtosis estimate (0 for a Gaussian).
double excess_kurtosis(std::span<const double> samples);

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;  // log-scale intercept
  double r2 = 0.0;
  double ci_lo = 0.0;  // bootstrap 95% band on the exponent
  double ci_hi = 0.0;
  int points = 0;
};

// Least-squares fit of log|v| against log r over r in [r_min, r_max].
// strict = true rejects non-positive values; otherwise |v| is used and
// zero entries are dropped.
DecayFit decay_fit(std::span<const double> radii, std::span<const double> values,
                   double r_min, double r_max, bool strict = true,
                   int bootstrap = 200, uint64_t seed = 12345);

}  // namespace corrlab
