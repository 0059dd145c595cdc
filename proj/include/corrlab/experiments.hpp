// Orchestration: run configuration, the eight experiments, report tables,
// the main-theorem trend comparison, and persistence (manifest, CSV,
// summary with per-criterion verdicts).
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrlab/environment.hpp"
#include "corrlab/solver.hpp"

namespace corrlab {

std::string corrlab_version_string();

struct RunConfig {
  int dim = 3;
  int side = 16;
  double mu = 0.0;
  std::vector<double> xi = {1.0, 0.0, 0.0};
  int64_t samples = 100;
  uint64_t seed = 1;
  int threads = 1;  // 0 = hardware concurrency

  // coefficients
  std::string family = "tanh";
  double a_min = 0.9;
  double a_max = 1.1;
  double tau = 1.0;
  double constant_value = 1.0;

  // resolvent quadrature
  int nodes = 8;
  int64_t mc_samples = 20000;

  SolveConfig solver;

  // correlation-map: Q-estimation sub-run
  int q_side = 8;
  int64_t q_samples = 64;
  int q_nodes = 8;

  // analysis window; r_max = 0 means side/4
  double r_min = 2.0;
  double r_max = 0.0;
  bool moments = true;

  // green-decay
  int64_t decay_samples = 500;
  double decay_mu = 0.25;

  // conv-bounds; the cutoff must be >= 4 max|x|, and the tail-sensitivity
  // check compares against the half box, so the default keeps the half box
  // at that minimum
  std::vector<double> conv_radii = {4, 8, 16, 32};
  int conv_cutoff_factor = 16;

  // estimate-q extras
  bool gff_scan = false;

  CoefficientMap coefficient_map() const;
  int effective_threads() const;
  double analysis_r_max() const { return r_max > 0.0 ? r_max : side / 4.0; }
};

// Strict parse: unknown keys are rejected with their path.
RunConfig parse_config(const std::string& json_text);
std::string default_config_json();

struct Criterion {
  std::string id;
  std::string description;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool hard = true;  // hard criteria gate the exit status
};

struct Summary {
  std::string experiment;
  std::vector<Criterion> criteria;
  bool all_pass = true;

  void add(Criterion c) {
    if (c.hard && !c.pass) all_pass = false;
    criteria.push_back(std::move(c));
  }
  std::string to_json() const;
  std::string first_failure() const;
};

// ---- correlation pipeline ---------------------------------------------

struct CorrelationShell {
  double r = 0.0;
  int64_t count = 0;     // lattice vectors in the shell
  double C = 0.0;        // empirical translation-averaged correlation
  double C_err = 0.0;    // environment-level CLT error
  double K_cont = 0.0;   // continuum kernel prediction, shell-averaged
  double K_lat = 0.0;    // torus-periodized lattice prediction
  double K_inf = 0.0;    // infinite-lattice prediction (within the cap)
  double C_deper = 0.0;  // C + (K_inf - K_lat): de-periodized estimate
  bool has_inf = false;  // K_inf evaluated for this shell
};

struct MomentRow {
  double mu = 0.0;
  double p = 0.0;
  double phi_moment = 0.0;   // E |phi_xi(0)|^p (translation-averaged)
  double grad_moment = 0.0;  // E |grad phi_xi(e)|^p
};

struct CorrelationReport {
  int dim = 0;
  int side = 0;
  int64_t samples = 0;
  uint64_t seed = 0;
  std::vector<double> xi;
  double ah = 0.0, ah_err = 0.0;
  std::vector<double> Q, Q_err;
  int q_side = 0;
  int64_t q_samples = 0;
  std::vector<CorrelationShell> shells;  // ascending r, starts at r = 0
  std::vector<MomentRow> moments;
  double reflection_defect = 0.0;  // max |C(x) - C(-x)| on the mean field
};

struct TheoremVerdict {
  // (i) decay exponent of the de-periodized correlation vs -(d-2),
  // fitted over [r_min, r_max]
  double c_exponent = 0.0;
  bool pass_exponent = false;
  // (ii) C/K ratio trend toward 1 across dyadic radii: the deviation must
  // shrink (with error-bar slack) and end close to 0
  double ratio_first = 0.0, ratio_last = 0.0;
  bool pass_trend = false;
  // (iii) |C - K| decays >= 0.5 steeper than K; octave-binned log-log fit
  // over [1, r_max] so dense large-r shells do not swamp the resolved
  // small-r deviation
  double gap = 0.0;
  bool pass_gap = false;
  bool inconclusive = false;  // not enough radii
};

TheoremVerdict theorem_comparison(const CorrelationReport& rep, double r_min,
                                  double r_max);

CorrelationReport correlation_map(const RunConfig& cfg);

// ---- appendix convolution bounds ---------------------------------------

struct ConvBoundRow {
  double r = 0.0;
  double sum = 0.0;      // S(x) by direct summation over the cutoff box
  double scaled = 0.0;   // S(x) * |x|_*^beta (with log corrections applied)
  double tail_check = 0.0;  // relative change when halving the cutoff
};

struct ConvBoundReport {
  double alpha = 0.0, beta = 0.0;
  bool log_numerator = false;
  std::vector<ConvBoundRow> rows;
  double scaled_ratio = 0.0;  // max/min of the scaled column
  bool cutoff_flagged = false;
};

ConvBoundReport convolution_bound_check(double alpha, double beta, bool log_numerator,
                                        int d, std::span<const double> radii,
                                        int cutoff_factor);

// ---- experiment drivers -------------------------------------------------

// Runs one experiment, writes manifest.json, CSV tables and summary.json
// into out_dir (created if missing). Known experiments: verify,
// estimate-ah, estimate-q, correlation-map, kernel-k, two-scale-battery,
// conv-bounds, green-decay.
Summary run_experiment(const RunConfig& cfg, const std::string& experiment,
                       const std::string& out_dir);

std::vector<std::string> experiment_names();

}  // namespace corrlab
