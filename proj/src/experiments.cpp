#include "corrlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "corrlab/hermite.hpp"
#include "corrlab/homogenize.hpp"
#include "corrlab/kernels.hpp"
#include "corrlab/lattice_green.hpp"
#include "corrlab/parallel.hpp"
#include "corrlab/resolvent.hpp"
#include "corrlab/stats.hpp"
#include "corrlab/twoscale.hpp"

namespace corrlab {

using nlohmann::json;

std::string corrlab_version_string() { return "corrlab 0.1.0"; }

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

CoefficientMap RunConfig::coefficient_map() const {
  if (family == "constant") return CoefficientMap::constant(constant_value);
  if (family == "tanh") return CoefficientMap::tanh_family(a_min, a_max, tau);
  throw std::invalid_argument("config: unknown coefficient family '" + family + "'");
}

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? int(hc) : 1;
}

namespace {

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + path + it.key() + "'");
  }
}

json config_to_json(const RunConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["side"] = c.side;
  j["mu"] = c.mu;
  j["xi"] = c.xi;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["coefficients"] = {{"family", c.family}, {"a_min", c.a_min}, {"a_max", c.a_max},
                       {"tau", c.tau},       {"value", c.constant_value}};
  j["quadrature"] = {{"nodes", c.nodes}, {"mc_samples", c.mc_samples}};
  j["solver"] = {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}};
  j["q_estimation"] = {{"side", c.q_side}, {"samples", c.q_samples}, {"nodes", c.q_nodes}};
  j["analysis"] = {{"r_min", c.r_min}, {"r_max", c.r_max}, {"moments", c.moments}};
  j["green_decay"] = {{"samples", c.decay_samples}, {"mu", c.decay_mu}};
  j["conv_bounds"] = {{"radii", c.conv_radii}, {"cutoff_factor", c.conv_cutoff_factor}};
  j["gff_scan"] = c.gff_scan;
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "", {"dim", "side", "mu", "xi", "samples", "seed", "threads",
                     "coefficients", "quadrature", "solver", "q_estimation", "analysis",
                     "green_decay", "conv_bounds", "gff_scan"});
  c.dim = j.value("dim", c.dim);
  c.side = j.value("side", c.side);
  c.mu = j.value("mu", c.mu);
  if (j.contains("xi")) c.xi = j.at("xi").get<std::vector<double>>();
  c.samples = j.value("samples", c.samples);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("coefficients")) {
    const json& o = j.at("coefficients");
    check_keys(o, "coefficients.", {"family", "a_min", "a_max", "tau", "value"});
    c.family = o.value("family", c.family);
    c.a_min = o.value("a_min", c.a_min);
    c.a_max = o.value("a_max", c.a_max);
    c.tau = o.value("tau", c.tau);
    c.constant_value = o.value("value", c.constant_value);
  }
  if (j.contains("quadrature")) {
    const json& o = j.at("quadrature");
    check_keys(o, "quadrature.", {"nodes", "mc_samples"});
    c.nodes = o.value("nodes", c.nodes);
    c.mc_samples = o.value("mc_samples", c.mc_samples);
  }
  if (j.contains("solver")) {
    const json& o = j.at("solver");
    check_keys(o, "solver.", {"tol", "max_iter"});
    c.solver.tol = o.value("tol", c.solver.tol);
    c.solver.max_iter = o.value("max_iter", c.solver.max_iter);
  }
  if (j.contains("q_estimation")) {
    const json& o = j.at("q_estimation");
    check_keys(o, "q_estimation.", {"side", "samples", "nodes"});
    c.q_side = o.value("side", c.q_side);
    c.q_samples = o.value("samples", c.q_samples);
    c.q_nodes = o.value("nodes", c.q_nodes);
  }
  if (j.contains("analysis")) {
    const json& o = j.at("analysis");
    check_keys(o, "analysis.", {"r_min", "r_max", "moments"});
    c.r_min = o.value("r_min", c.r_min);
    c.r_max = o.value("r_max", c.r_max);
    c.moments = o.value("moments", c.moments);
  }
  if (j.contains("green_decay")) {
    const json& o = j.at("green_decay");
    check_keys(o, "green_decay.", {"samples", "mu"});
    c.decay_samples = o.value("samples", c.decay_samples);
    c.decay_mu = o.value("mu", c.decay_mu);
  }
  if (j.contains("conv_bounds")) {
    const json& o = j.at("conv_bounds");
    check_keys(o, "conv_bounds.", {"radii", "cutoff_factor"});
    if (o.contains("radii")) c.conv_radii = o.at("radii").get<std::vector<double>>();
    c.conv_cutoff_factor = o.value("cutoff_factor", c.conv_cutoff_factor);
  }
  c.gff_scan = j.value("gff_scan", c.gff_scan);

  if (c.dim < 2) throw std::invalid_argument("config: dim must be >= 2");
  if (c.side < 2) throw std::invalid_argument("config: side must be >= 2");
  if (int(c.xi.size()) != c.dim)
    throw std::invalid_argument("config: xi must have dim components");
  if (c.samples < 1) throw std::invalid_argument("config: samples must be positive");
  c.coefficient_map();  // validates the family block
  return c;
}

std::string default_config_json() { return config_to_json(RunConfig{}).dump(2); }

std::string Summary::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["all_pass"] = all_pass;
  json rows = json::array();
  for (const auto& c : criteria) {
    rows.push_back({{"id", c.id},
                    {"description", c.description},
                    {"value", c.value},
                    {"threshold", c.threshold},
                    {"pass", c.pass},
                    {"hard", c.hard}});
  }
  j["criteria"] = rows;
  return j.dump(2);
}

std::string Summary::first_failure() const {
  for (const auto& c : criteria)
    if (c.hard && !c.pass) return c.id;
  return "";
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << header << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// correlation map
// ---------------------------------------------------------------------------

namespace {

// shell decomposition by squared wrapped radius
struct Shells {
  std::vector<int64_t> shell_of_site;  // index into radii
  std::vector<double> radii;           // ascending
  std::vector<int64_t> counts;
};

Shells build_shells(const Torus& T) {
  std::map<int64_t, int64_t> r2_to_shell;
  std::vector<int> x(T.dim());
  std::vector<int64_t> r2_of_site(T.sites());
  for (int64_t s = 0; s < T.sites(); ++s) {
    T.coords(s, x.data());
    int64_t r2 = 0;
    for (int k = 0; k < T.dim(); ++k) {
      int c = x[k];
      if (c > T.side() / 2) c -= T.side();
      r2 += int64_t(c) * c;
    }
    r2_of_site[s] = r2;
    r2_to_shell[r2] = 0;
  }
  Shells sh;
  int64_t idx = 0;
  for (auto& [r2, id] : r2_to_shell) {
    id = idx++;
    sh.radii.push_back(std::sqrt(double(r2)));
  }
  sh.counts.assign(idx, 0);
  sh.shell_of_site.resize(T.sites());
  for (int64_t s = 0; s < T.sites(); ++s) {
    const int64_t id = r2_to_shell[r2_of_site[s]];
    sh.shell_of_site[s] = id;
    sh.counts[id] += 1;
  }
  return sh;
}

std::vector<double> shell_average(const Shells& sh, std::span<const double> field) {
  std::vector<double> acc(sh.radii.size(), 0.0);
  for (size_t s = 0; s < field.size(); ++s) acc[sh.shell_of_site[s]] += field[s];
  for (size_t i = 0; i < acc.size(); ++i) acc[i] /= double(sh.counts[i]);
  return acc;
}

}  // namespace

CorrelationReport correlation_map(const RunConfig& cfg) {
  if (cfg.dim != 3)
    throw std::invalid_argument("correlation-map: d = 3 required by the kernel evaluator");
  const CoefficientMap map = cfg.coefficient_map();
  const TorusPtr torus = make_torus(cfg.dim, cfg.side);
  const Torus& T = *torus;
  const int d = cfg.dim;
  const int64_t N = T.sites();
  const int threads = cfg.effective_threads();

  CorrelationReport rep;
  rep.dim = d;
  rep.side = cfg.side;
  rep.samples = cfg.samples;
  rep.seed = cfg.seed;
  rep.xi = cfg.xi;
  rep.q_side = cfg.q_side;
  rep.q_samples = cfg.q_samples;

  // Q estimate on its own (smaller) torus; distinct seed block
  const HomogenizedData qdata =
      estimate_Q(make_torus(cfg.dim, cfg.q_side), map, cfg.xi, cfg.q_nodes, cfg.q_samples,
                 cfg.seed ^ 0x71c9a3f05b2d14e7ull, cfg.solver, threads);
  rep.Q = qdata.Q;
  rep.Q_err = qdata.Q_err;

  const Shells sh = build_shells(T);
  const int64_t nshell = int64_t(sh.radii.size());

  struct PerEnv {
    std::vector<double> shellC;
    std::vector<double> flux;  // d*d
    std::vector<double> mom;   // per p: phi/grad at mu=0, then mu=0.01
    std::vector<double> meanC;
  };
  std::vector<PerEnv> slots(cfg.samples);
  const std::vector<double> ps = {2.0, 4.0, 8.0};
  const double mu2 = 1e-2;
  int grad_axis = 0;
  for (int k = 1; k < d; ++k)
    if (std::abs(cfg.xi[k]) > std::abs(cfg.xi[grad_axis])) grad_axis = k;

  parallel_for_indexed(cfg.samples, threads, [&](int64_t n) {
    const Environment env = sample_environment(torus, map, cfg.seed, uint64_t(n));
    const CorrectorSet set = solve_correctors(env, 0.0, cfg.solver);
    ScalarField phix = set.phi_xi(cfg.xi);
    phix.subtract_mean();
    std::vector<double> C = torus_autocorrelation(phix);
    // exact evenness by construction
    std::vector<int> xc(d);
    for (int64_t s = 0; s < N; ++s) {
      T.coords(s, xc.data());
      for (int k = 0; k < d; ++k) xc[k] = (T.side() - xc[k]) % T.side();
      const int64_t sm = T.site_at(xc);
      if (sm > s) {
        const double avg = 0.5 * (C[s] + C[sm]);
        C[s] = avg;
        C[sm] = avg;
      }
    }
    PerEnv pe;
    pe.shellC = shell_average(sh, C);
    pe.meanC = std::move(C);
    // flux matrix for Ah
    pe.flux.assign(d * d, 0.0);
    for (int64_t e = 0; e < T.edges(); ++e) {
      const int i = T.edge_axis(e);
      for (int j = 0; j < d; ++j)
        pe.flux[i * d + j] += env.a.v[e] * ((i == j ? 1.0 : 0.0) + set.grad_phi[j].v[e]);
    }
    for (double& f : pe.flux) f /= double(N);
    if (cfg.moments) {
      const EdgeField grad0 = gradient(phix);
      ScalarField phimu = solve_corrector_direction(env, mu2, cfg.xi, cfg.solver);
      const EdgeField gradmu = gradient(phimu);
      for (double p : ps) {
        double mp0 = 0.0, mg0 = 0.0, mpm = 0.0, mgm = 0.0;
        for (int64_t s = 0; s < N; ++s) {
          mp0 += std::pow(std::abs(phix.v[s]), p);
          mpm += std::pow(std::abs(phimu.v[s]), p);
          mg0 += std::pow(std::abs(grad0.v[s * d + grad_axis]), p);
          mgm += std::pow(std::abs(gradmu.v[s * d + grad_axis]), p);
        }
        pe.mom.push_back(mp0 / N);
        pe.mom.push_back(mg0 / N);
        pe.mom.push_back(mpm / N);
        pe.mom.push_back(mgm / N);
      }
    }
    slots[n] = std::move(pe);
  });

  // reduce Ah
  std::vector<double> col(cfg.samples);
  for (int64_t n = 0; n < cfg.samples; ++n) {
    double diag = 0.0;
    for (int i = 0; i < d; ++i) diag += slots[n].flux[i * d + i];
    col[n] = diag / d;
  }
  const MeanErr ahm = mean_stderr(col);
  rep.ah = ahm.mean;
  rep.ah_err = ahm.stderr_;

  // reduce shells
  rep.shells.resize(nshell);
  for (int64_t i = 0; i < nshell; ++i) {
    for (int64_t n = 0; n < cfg.samples; ++n) col[n] = slots[n].shellC[i];
    const MeanErr me = mean_stderr(col);
    rep.shells[i].r = sh.radii[i];
    rep.shells[i].count = sh.counts[i];
    rep.shells[i].C = me.mean;
    rep.shells[i].C_err = me.stderr_;
  }

  // reflection defect of the mean field (exactly zero by symmetrization)
  {
    std::vector<double> meanC(N, 0.0);
    for (int64_t n = 0; n < cfg.samples; ++n)
      for (int64_t s = 0; s < N; ++s) meanC[s] += slots[n].meanC[s];
    std::vector<int> xc(d);
    double defect = 0.0;
    for (int64_t s = 0; s < N; ++s) {
      T.coords(s, xc.data());
      for (int k = 0; k < d; ++k) xc[k] = (T.side() - xc[k]) % T.side();
      defect = std::max(defect, std::abs(meanC[s] - meanC[T.site_at(xc)]));
    }
    rep.reflection_defect = defect;
  }

  // predictions from (Q, ah): torus-periodized, infinite-lattice (within a
  // radius cap), and continuum
  {
    const std::vector<double> Klat = torus_kernel_table(rep.Q, rep.ah, T);
    const std::vector<double> klat_shell = shell_average(sh, Klat);
    const std::vector<double> A_diag(d, rep.ah);
    const double r_cap = std::min(T.side() / 2.0, cfg.analysis_r_max() + 4.0);
    std::vector<double> kcont_shell(nshell, 0.0), kinf_shell(nshell, 0.0);
    std::vector<int64_t> kinf_count(nshell, 0);
    std::vector<int> xc(d), xi_(d);
    std::vector<double> xd(d);
    for (int64_t s = 0; s < N; ++s) {
      T.coords(s, xc.data());
      bool zero = true;
      for (int k = 0; k < d; ++k) {
        int c = xc[k];
        if (c > T.side() / 2) c -= T.side();
        xi_[k] = c;
        xd[k] = c;
        if (c != 0) zero = false;
      }
      const int64_t id = sh.shell_of_site[s];
      if (!zero) kcont_shell[id] += kernel_k_closed(rep.Q, A_diag, xd);
      if (sh.radii[id] <= r_cap) {
        kinf_shell[id] += lattice_kernel_inf(rep.Q, rep.ah, xi_).value;
        kinf_count[id] += 1;
      }
    }
    for (int64_t i = 0; i < nshell; ++i) {
      rep.shells[i].K_lat = klat_shell[i];
      rep.shells[i].K_cont =
          (sh.radii[i] > 0.0) ? kcont_shell[i] / double(sh.counts[i]) : 0.0;
      if (kinf_count[i] == sh.counts[i]) {
        rep.shells[i].K_inf = kinf_shell[i] / double(kinf_count[i]);
        rep.shells[i].has_inf = true;
        rep.shells[i].C_deper = rep.shells[i].C + rep.shells[i].K_inf - rep.shells[i].K_lat;
      }
    }
  }

  // moments
  if (cfg.moments) {
    for (size_t pi = 0; pi < ps.size(); ++pi) {
      for (int which = 0; which < 2; ++which) {  // 0: mu=0, 1: mu=1e-2
        MomentRow row;
        row.mu = which == 0 ? 0.0 : mu2;
        row.p = ps[pi];
        for (int64_t n = 0; n < cfg.samples; ++n) col[n] = slots[n].mom[4 * pi + 2 * which];
        row.phi_moment = mean_stderr(col).mean;
        for (int64_t n = 0; n < cfg.samples; ++n)
          col[n] = slots[n].mom[4 * pi + 2 * which + 1];
        row.grad_moment = mean_stderr(col).mean;
        rep.moments.push_back(row);
      }
    }
  }
  return rep;
}

TheoremVerdict theorem_comparison(const CorrelationReport& rep, double r_min,
                                  double r_max) {
  TheoremVerdict v;
  const int d = rep.dim;
  std::vector<double> radii, c_deper;
  for (const auto& s : rep.shells) {
    if (s.r < r_min || s.r > r_max || s.r == 0.0 || !s.has_inf) continue;
    radii.push_back(s.r);
    c_deper.push_back(s.C_deper);
  }
  if (radii.size() < 4) {
    v.inconclusive = true;
    return v;
  }

  // (i) de-periodized correlation decays like r^{-(d-2)}
  const DecayFit cfit = decay_fit(radii, c_deper, r_min, r_max, /*strict=*/false);
  v.c_exponent = cfit.exponent;
  v.pass_exponent = std::abs(cfit.exponent + double(d - 2)) <= 0.3;

  // (ii) C/K ratio trend toward 1 across dyadic radii: the deviation must
  // shrink (up to error-bar slack) and the final ratio must sit near 1
  std::vector<std::array<double, 2>> dyadic;  // (ratio, sigma)
  for (double r = 2.0; r <= r_max + 1e-9; r *= 2.0) {
    for (const auto& s : rep.shells) {
      if (std::abs(s.r - r) < 1e-9 && s.has_inf && s.K_cont != 0.0) {
        dyadic.push_back({s.C_deper / s.K_cont, std::abs(s.C_err / s.K_cont)});
        break;
      }
    }
  }
  if (dyadic.size() < 2) {
    v.inconclusive = true;
  } else {
    v.ratio_first = dyadic.front()[0];
    v.ratio_last = dyadic.back()[0];
    const double slack = 2.0 * (dyadic.front()[1] + dyadic.back()[1]);
    const bool shrinking =
        std::abs(v.ratio_last - 1.0) <= 0.8 * std::abs(v.ratio_first - 1.0) + slack;
    const bool lands = std::abs(v.ratio_last - 1.0) <= std::max(0.25, 3.0 * dyadic.back()[1]);
    v.pass_trend = shrinking && lands;
  }

  // (iii) |C - K| vs K, octave-binned log-log fit over [1, r_max]. Shells
  // crowd at large radii, so equal per-shell weighting would let the
  // noise floor swamp the resolved small-r deviation.
  std::vector<double> brad, bdiff, bkc;
  for (double lo = 1.0; lo < r_max; lo *= 2.0) {
    const double hi = std::min(lo * 2.0, r_max + 1e-9);
    double sd = 0.0, sk = 0.0, sr = 0.0;
    int cnt = 0;
    for (const auto& s : rep.shells) {
      if (s.r < lo || s.r >= hi || !s.has_inf || s.K_cont == 0.0) continue;
      sd += std::abs(s.C_deper - s.K_cont);
      sk += s.K_cont;
      sr += s.r;
      ++cnt;
    }
    if (cnt == 0) continue;
    brad.push_back(sr / cnt);
    bdiff.push_back(sd / cnt);
    bkc.push_back(sk / cnt);
  }
  if (brad.size() < 2) {
    v.inconclusive = true;
    return v;
  }
  double kmax = 0.0;
  for (double k : bkc) kmax = std::max(kmax, k);
  bool exact_match = true;
  for (double dd : bdiff)
    if (dd > 1e-14 * kmax) exact_match = false;
  if (exact_match) {
    v.gap = 999.0;
    v.pass_gap = true;
    return v;
  }
  auto two_point_slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double lx = std::log(xs[i]), ly = std::log(std::max(ys[i], 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double n = double(xs.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  const double ediff = two_point_slope(brad, bdiff);
  const double ek = two_point_slope(brad, bkc);
  v.gap = ek - ediff;
  v.pass_gap = v.gap >= 0.5;
  return v;
}

// ---------------------------------------------------------------------------
// appendix convolution bounds
// ---------------------------------------------------------------------------

ConvBoundReport convolution_bound_check(double alpha, double beta, bool log_numerator,
                                        int d, std::span<const double> radii,
                                        int cutoff_factor) {
  if (d != 3) throw std::invalid_argument("convolution_bound_check: d = 3 summation only");
  if (beta <= 0.0 || beta > alpha)
    throw std::invalid_argument("convolution_bound_check: need 0 < beta <= alpha");
  if (alpha < d)
    throw std::invalid_argument("convolution_bound_check: need alpha >= d");
  double rmax = 0.0;
  for (double r : radii) rmax = std::max(rmax, r);
  const int R = int(cutoff_factor * rmax);
  const int Rhalf = R / 2;

  ConvBoundReport rep;
  rep.alpha = alpha;
  rep.beta = beta;
  rep.log_numerator = log_numerator;
  std::vector<double> full(radii.size(), 0.0), half(radii.size(), 0.0);
  const bool beta_is_2 = std::abs(beta - 2.0) < 1e-15;
  const bool alpha_is_3 = std::abs(alpha - 3.0) < 1e-15;
  const bool alpha_is_4 = std::abs(alpha - 4.0) < 1e-15;

  // x sits on the first axis, so the summand is mirror-symmetric in y1, y2.
  for (int y0 = -R; y0 <= R; ++y0) {
    const bool h0 = std::abs(y0) <= Rhalf;
    for (int y1 = 0; y1 <= R; ++y1) {
      const double m1 = (y1 > 0) ? 2.0 : 1.0;
      const bool h1 = y1 <= Rhalf;
      for (int y2 = 0; y2 <= R; ++y2) {
        const double ry =
            std::sqrt(double(y0) * y0 + double(y1) * y1 + double(y2) * y2) + 2.0;
        const double t = 1.0 / ry;
        double w;
        if (alpha_is_3) {
          w = t * t * t;
        } else if (alpha_is_4) {
          w = (t * t) * (t * t);
        } else {
          w = std::pow(ry, -alpha);
        }
        if (log_numerator) w *= std::log(ry);
        w *= m1 * ((y2 > 0) ? 2.0 : 1.0);
        const bool in_half = h0 && h1 && y2 <= Rhalf;
        for (size_t i = 0; i < radii.size(); ++i) {
          const double dx = y0 - radii[i];
          const double rxy =
              std::sqrt(dx * dx + double(y1) * y1 + double(y2) * y2) + 2.0;
          const double term = beta_is_2 ? w / (rxy * rxy) : w * std::pow(rxy, -beta);
          full[i] += term;
          if (in_half) half[i] += term;
        }
      }
    }
  }

  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < radii.size(); ++i) {
    ConvBoundRow row;
    row.r = radii[i];
    row.sum = full[i];
    const double rstar = radii[i] + 2.0;
    double scale = std::pow(rstar, beta);
    if (log_numerator) {
      scale /= std::log(rstar) * std::log(rstar);
    } else if (std::abs(alpha - d) < 1e-15) {
      scale /= std::log(rstar);
    }
    row.scaled = full[i] * scale;
    row.tail_check = (full[i] - half[i]) / full[i];
    if (row.tail_check > 0.01) rep.cutoff_flagged = true;
    rep.rows.push_back(row);
    lo = (i == 0) ? row.scaled : std::min(lo, row.scaled);
    hi = std::max(hi, row.scaled);
  }
  rep.scaled_ratio = hi / lo;
  return rep;
}

// ---------------------------------------------------------------------------
// experiment drivers
// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

void write_summary_files(const fs::path& dir, const RunConfig& cfg, const Summary& summary,
                         const std::map<std::string, double>& wall) {
  json manifest;
  manifest["version"] = corrlab_version_string();
  manifest["experiment"] = summary.experiment;
  manifest["config"] = config_to_json(cfg);
  manifest["seed"] = cfg.seed;
  json times;
  for (const auto& [k, v] : wall) times[k] = v;
  manifest["wall_seconds"] = times;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  std::ofstream(dir / "summary.json") << summary.to_json() << "\n";
}

Criterion make_criterion(const std::string& id, const std::string& desc, double value,
                         double threshold, bool pass, bool hard = true) {
  Criterion c;
  c.id = id;
  c.description = desc;
  c.value = value;
  c.threshold = threshold;
  c.pass = pass;
  c.hard = hard;
  return c;
}

// ---- verify ----

Summary run_verify(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "verify";
  Csv csv(dir / "verify.csv", "check,value,threshold,pass");

  auto record = [&](const std::string& id, const std::string& desc, double value,
                    double threshold, bool pass) {
    summary.add(make_criterion(id, desc, value, threshold, pass));
    csv.row({id, fmt(value), fmt(threshold), pass ? "1" : "0"});
  };

  // adjointness of gradient/divergence
  {
    const TorusPtr t = make_torus(3, 4);
    EdgeField F(t);
    ScalarField g(t);
    for (int64_t e = 0; e < t->edges(); ++e) F.v[e] = counter_normal(7, 1, uint64_t(e));
    for (int64_t s = 0; s < t->sites(); ++s) g.v[s] = counter_normal(7, 2, uint64_t(s));
    const double lhs = dot(divergence(F), g);
    const double rhs = dot_edges(F, gradient(g));
    const double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
    record("adjointness", "sum-by-parts identity on the 4^3 torus", err, 1e-12, err < 1e-12);
  }

  // Helffer-Sjostrand closed-form corpus through the Hermite oracle
  {
    const auto id1 = Functional::of_coords(1, [](std::span<const double> z) { return z[0]; });
    const auto h2 =
        Functional::of_coords(1, [](std::span<const double> z) { return z[0] * z[0] - 1.0; });
    const auto mix = Functional::of_coords(
        2, [](std::span<const double> z) { return z[0] * z[1]; });
    const double e1 = std::abs(hermite_resolvent_value(id1, id1) - 0.5);
    const double e2 = std::abs(hermite_resolvent_value(h2, h2) - 2.0 / 3.0);
    const double e3 = std::abs(hermite_resolvent_value(mix, mix) - 1.0 / 3.0);
    const double worst = std::max({e1, e2, e3});
    record("hs-oracle", "oracle matches closed-form resolvent values", worst, 1e-12,
           worst < 1e-12);

    QuadratureSpec quad;
    quad.mc_samples = 40000;
    quad.seed = 11;
    const McEstimate m1 = resolvent_bilinear_mc(id1, id1, quad);
    const McEstimate m2 = resolvent_bilinear_mc(h2, h2, quad);
    const McEstimate m3 = resolvent_bilinear_mc(mix, mix, quad);
    const double z1 = std::abs(m1.value - 0.5) / m1.stderr_;
    const double z2 = std::abs(m2.value - 2.0 / 3.0) / m2.stderr_;
    const double z3 = std::abs(m3.value - 1.0 / 3.0) / m3.stderr_;
    const double worstz = std::max({z1, z2, z3});
    record("hs-mc", "Mehler MC reproduces closed forms (3 sigma)", worstz, 3.0, worstz < 3.0);
  }

  // resolvent eigenvalue scaling on Hermite monomials
  {
    double worst = 0.0;
    for (int n = 1; n <= 8; ++n) {
      const std::vector<int> alpha = {n};
      const HermiteExpansion f = HermiteExpansion::monomial(alpha);
      double fact = 1.0;
      for (int k = 2; k <= n; ++k) fact *= k;
      const double got = HermiteExpansion::resolvent_bilinear(f, f);
      worst = std::max(worst, std::abs(got - fact / (n + 1.0)) / (fact / (n + 1.0)));
    }
    record("resolvent-eigenvalues", "(L+1)^{-1} scales degree-n products by 1/(n+1)",
           worst, 1e-12, worst < 1e-12);
  }

  // CG against the dense oracle
  {
    const TorusPtr t = make_torus(3, 4);
    const CoefficientMap map = CoefficientMap::tanh_family(0.5, 1.5, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 5; ++s) {
      const Environment env = sample_environment(t, map, 99, uint64_t(s));
      ScalarField f(t);
      for (int64_t i = 0; i < t->sites(); ++i) f.v[i] = counter_normal(100, s, uint64_t(i));
      const double mu = (s % 2 == 0) ? 1.0 : 0.0;
      if (mu == 0.0) f.subtract_mean();
      SolveConfig sc;
      sc.tol = 1e-12;
      const ScalarField u = solve(env, mu, f, sc);
      const ScalarField v = dense_oracle_solve(env, mu, f);
      for (int64_t i = 0; i < t->sites(); ++i)
        worst = std::max(worst, std::abs(u.v[i] - v.v[i]));
    }
    record("solver-oracle", "CG matches dense LU on 4^3", worst, 1e-9, worst < 1e-9);
  }

  // two-scale residual identity
  {
    const TorusPtr t = make_torus(3, 8);
    const CoefficientMap map = CoefficientMap::tanh_family(0.7, 1.3, 1.0);
    SolveConfig sc;
    sc.tol = 1e-12;
    double worst = 0.0;
    const double ah = arithmetic_mean_a(map);
    for (int s = 0; s < 3; ++s) {
      const Environment env = sample_environment(t, map, 101, uint64_t(s));
      const CorrectorSet set = solve_correctors(env, 0.0, sc);
      const GreenColumn g0 = green_column(env, 0.0, 0, sc);
      const TwoScaleBundle b = build_bundle(env, set, g0, ah);
      worst = std::max(worst, residual_report(b).max_dev);
    }
    record("two-scale-residual", "div-form identity residual on 8^3", worst, 1e-8,
           worst < 1e-8);
  }

  // kernel method agreement
  {
    const std::vector<double> A = {1.0, 1.0, 1.0};
    const std::vector<double> Q = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    double worst = 0.0;
    const std::vector<std::vector<double>> pts = {{1, 0, 0}, {0, 1, 0}, {2, 1, 0}};
    for (const auto& x : pts) {
      const double closed = kernel_k_closed(Q, A, x);
      const KernelSynthesis syn = kernel_k_fourier(Q, A, x);
      worst = std::max(worst, std::abs(closed - syn.value) / std::abs(closed));
    }
    record("kernel-methods", "closed form vs Fourier synthesis", worst, 1e-4, worst < 1e-4);
  }

  // determinism of the sampler
  {
    const TorusPtr t = make_torus(3, 8);
    const CoefficientMap map = CoefficientMap::tanh_family(0.9, 1.1, 1.0);
    const Environment a = sample_environment(t, map, 4242, 7);
    const Environment b = sample_environment(t, map, 4242, 7);
    bool same = a.zeta.v == b.zeta.v && a.a.v == b.a.v;
    record("determinism", "bit-identical regeneration from (seed, index)", same ? 0.0 : 1.0,
           0.5, same);
  }

  return summary;
}

// ---- estimate-ah ----

Summary run_estimate_ah(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "estimate-ah";
  const CoefficientMap map = cfg.coefficient_map();
  const HomogenizedData data =
      estimate_Ah(make_torus(cfg.dim, cfg.side), map, cfg.mu, cfg.samples, cfg.seed,
                  cfg.solver, cfg.effective_threads());
  std::ofstream(dir / "homogenized.json") << data.to_json() << "\n";
  Csv csv(dir / "ah.csv", "i,j,value,stderr");
  const int d = cfg.dim;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      csv.row({std::to_string(i), std::to_string(j), fmt(data.Ah[i * d + j]),
               fmt(data.Ah_err[i * d + j])});

  double off_z = 0.0, asym_z = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      off_z = std::max(off_z, std::abs(data.Ah[i * d + j]) /
                                  std::max(data.Ah_err[i * d + j], 1e-300));
      const double asym = std::abs(data.Ah[i * d + j] - data.Ah[j * d + i]);
      const double sig = data.Ah_err[i * d + j] + data.Ah_err[j * d + i];
      asym_z = std::max(asym_z, asym / std::max(sig, 1e-300));
    }
  summary.add(make_criterion("ah-offdiag", "off-diagonal entries within 3 sigma of 0",
                             off_z, 3.0, off_z < 3.0));
  summary.add(make_criterion("ah-symmetry", "Ah symmetric within error bars", asym_z, 3.0,
                             asym_z < 3.0));
  const double lo = harmonic_mean_a(map), hi = arithmetic_mean_a(map);
  const bool vr = data.ah_scalar >= lo - 3.0 * data.ah_err &&
                  data.ah_scalar <= hi + 3.0 * data.ah_err;
  summary.add(make_criterion("voigt-reuss", "harmonic mean <= ah <= arithmetic mean",
                             data.ah_scalar, hi, vr));
  return summary;
}

// ---- estimate-q ----

Summary run_estimate_q(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "estimate-q";
  const CoefficientMap map = cfg.coefficient_map();
  const TorusPtr torus = make_torus(cfg.dim, cfg.side);
  const int d = cfg.dim;
  const int threads = cfg.effective_threads();

  const HomogenizedData data = estimate_Q(torus, map, cfg.xi, cfg.nodes, cfg.samples,
                                          cfg.seed, cfg.solver, threads);
  std::ofstream(dir / "homogenized.json") << data.to_json() << "\n";
  Csv csv(dir / "q.csv", "i,j,value,stderr");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      csv.row({std::to_string(i), std::to_string(j), fmt(data.Q[i * d + j]),
               fmt(data.Q_err[i * d + j])});

  const PositivityReport psd = q_positivity_report(data.Q, data.Q_err, d);
  {
    Csv ecsv(dir / "q_eigenvalues.csv", "eigenvalue,stderr");
    for (size_t k = 0; k < psd.eigenvalues.size(); ++k)
      ecsv.row({fmt(psd.eigenvalues[k]), fmt(psd.eigenvalue_err[k])});
  }
  const double min_eig = psd.eigenvalues.front();
  summary.add(make_criterion("q-psd", "minimal eigenvalue above -3 sigma", min_eig,
                             -3.0 * psd.eigenvalue_err.front(), !psd.flagged));

  // transverse symmetry (when xi is along a coordinate axis)
  int axis = -1;
  for (int k = 0; k < d; ++k) {
    if (cfg.xi[k] != 0.0) {
      if (axis < 0)
        axis = k;
      else
        axis = -2;
    }
  }
  if (axis >= 0 && d == 3) {
    const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
    const double diffz =
        std::abs(data.Q[t1 * d + t1] - data.Q[t2 * d + t2]) /
        std::max(data.Q_err[t1 * d + t1] + data.Q_err[t2 * d + t2], 1e-300);
    summary.add(make_criterion("q-transverse", "transverse diagonal entries agree (3 sigma)",
                               diffz, 3.0, diffz < 3.0));
  }

  // quadratic scaling in xi
  {
    std::vector<double> xi2(cfg.xi);
    for (double& c : xi2) c *= 2.0;
    const HomogenizedData data2 = estimate_Q(torus, map, xi2, cfg.nodes, cfg.samples,
                                             cfg.seed, cfg.solver, threads);
    double worst = 0.0;
    for (int k = 0; k < d * d; ++k) {
      const double sig = 4.0 * data.Q_err[k] + data2.Q_err[k];
      worst = std::max(worst,
                       std::abs(data2.Q[k] - 4.0 * data.Q[k]) / std::max(sig, 1e-300));
    }
    summary.add(make_criterion("q-quadratic", "Q(2 xi) = 4 Q(xi) within error bars", worst,
                               3.0, worst < 3.0));
  }

  // polarization route: xi'.Q xi' via a dedicated scalar estimator
  {
    std::vector<double> xip(d, 0.0);
    xip[(axis >= 0 ? (axis + 1) % d : 1)] = 1.0;
    const ScalarQEstimate sq = estimate_Q_quadratic_form(
        torus, map, cfg.xi, xip, cfg.nodes, std::min<int64_t>(cfg.samples, 64), cfg.seed,
        cfg.solver);
    double contr = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) contr += xip[i] * data.Q[i * d + j] * xip[j];
    double sig_c = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        sig_c += xip[i] * xip[i] * xip[j] * xip[j] * data.Q_err[i * d + j] *
                 data.Q_err[i * d + j];
    const double z = std::abs(sq.value - contr) /
                     std::max(std::sqrt(sig_c) + sq.stderr_, 1e-300);
    summary.add(make_criterion("q-polarization", "scalar route matches matrix contraction",
                               z, 3.0, z < 3.0));
  }

  if (cfg.gff_scan) {
    Csv gcsv(dir / "gff_defect.csv", "contrast,defect,trQ,ah");
    for (double contrast : {1.2, 3.0, 9.0}) {
      const double amin = 2.0 / (1.0 + contrast);  // keep (amin+amax)/2 = 1
      const CoefficientMap m2 = CoefficientMap::tanh_family(amin, amin * contrast, 1.0);
      const HomogenizedData qd = estimate_Q(torus, m2, cfg.xi, cfg.nodes, cfg.samples,
                                            cfg.seed, cfg.solver, threads);
      const std::vector<double> A_diag(d, qd.ah_scalar);
      const GffDefect gd = gff_defect(qd.Q, A_diag);
      double trq = 0.0;
      for (int i = 0; i < d; ++i) trq += qd.Q[i * d + i];
      gcsv.row({fmt(contrast), fmt(gd.defect), fmt(trq), fmt(qd.ah_scalar)});
    }
  }
  return summary;
}

// ---- correlation-map ----

Summary run_correlation_map(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "correlation-map";
  const CorrelationReport rep = correlation_map(cfg);

  Csv csv(dir / "correlation.csv",
          "r,count,C,C_err,K_cont,K_lat,K_inf,C_deper,ratio_torus,ratio_deper");
  for (const auto& s : rep.shells) {
    const double rr = (s.K_lat != 0.0) ? s.C / s.K_lat : 0.0;
    const double rc = (s.has_inf && s.K_cont != 0.0) ? s.C_deper / s.K_cont : 0.0;
    csv.row({fmt(s.r), std::to_string(s.count), fmt(s.C), fmt(s.C_err), fmt(s.K_cont),
             fmt(s.K_lat), fmt(s.has_inf ? s.K_inf : 0.0), fmt(s.has_inf ? s.C_deper : 0.0),
             fmt(rr), fmt(rc)});
  }
  {
    json qj;
    qj["Q"] = rep.Q;
    qj["Q_err"] = rep.Q_err;
    qj["ah"] = rep.ah;
    qj["ah_err"] = rep.ah_err;
    qj["q_side"] = rep.q_side;
    qj["q_samples"] = rep.q_samples;
    std::ofstream(dir / "q_used.json") << qj.dump(2) << "\n";
  }

  const CoefficientMap map = cfg.coefficient_map();
  const bool flat = map.family() == "constant";

  // C(0) is a variance; positive for any non-constant coefficient field
  const double c0 = rep.shells.front().C;
  if (!flat) {
    summary.add(make_criterion("c0-positive", "C(0) > 0 for non-constant coefficients", c0,
                               0.0, c0 > 0.0));
  }
  summary.add(make_criterion("reflection", "C(x) = C(-x) exactly", rep.reflection_defect,
                             0.0, rep.reflection_defect == 0.0));

  const double r_lo = cfg.side >= 32 ? 4.0 : cfg.r_min;
  const double r_hi = cfg.analysis_r_max();
  const TheoremVerdict verdict = theorem_comparison(rep, r_lo, r_hi);
  const bool full = cfg.side >= 32;
  if (!flat) {
    summary.add(make_criterion(
        "trend-exponent",
        "de-periodized C decay exponent within 0.3 of -(d-2) over [" + fmt(r_lo) + "," +
            fmt(r_hi) + "]",
        verdict.c_exponent, -(double(cfg.dim) - 2.0), verdict.pass_exponent && !verdict.inconclusive));
    summary.add(make_criterion("trend-ratio", "C/K ratio trend toward 1 across dyadic radii",
                               verdict.ratio_last, 1.0,
                               verdict.inconclusive ? false : verdict.pass_trend, full));
    summary.add(make_criterion("trend-gap", "|C-K| decays >= 0.5 steeper than K",
                               verdict.gap, 0.5, verdict.inconclusive ? false : verdict.pass_gap,
                               full));
  }

  if (cfg.moments && !rep.moments.empty()) {
    Csv mcsv(dir / "moments.csv", "mu,p,phi_moment,grad_moment");
    for (const auto& m : rep.moments)
      mcsv.row({fmt(m.mu), fmt(m.p), fmt(m.phi_moment), fmt(m.grad_moment)});
    if (!flat) {
      double worst = 0.0;
      for (size_t i = 0; i + 1 < rep.moments.size(); i += 2) {
        const auto& m0 = rep.moments[i];
        const auto& m1 = rep.moments[i + 1];
        worst = std::max(worst, std::abs(m1.phi_moment / m0.phi_moment - 1.0));
        worst = std::max(worst, std::abs(m1.grad_moment / m0.grad_moment - 1.0));
      }
      summary.add(make_criterion("moment-stability",
                                 "corrector moments stable across mu in {0, 1e-2}", worst,
                                 0.2, worst < 0.2));
    }
  }
  return summary;
}

// ---- kernel-k ----

Summary run_kernel_k(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "kernel-k";
  Csv csv(dir / "kernel_k.csv", "case,x1,x2,x3,method,regularization,value,error");

  struct Case {
    std::string name;
    std::vector<double> Q;
    std::vector<double> A;
  };
  const std::vector<Case> cases = {
      {"isotropic", {1, 0, 0, 0, 1, 0, 0, 0, 1}, {1, 1, 1}},
      {"rank-weighted", {2, 0, 0, 0, 1, 0, 0, 0, 1}, {1, 1, 1}},
      {"anisotropic-a", {1, 0, 0, 0, 1, 0, 0, 0, 1}, {1.5, 1.0, 0.75}},
  };
  const std::vector<std::vector<double>> pts = {{1, 0, 0}, {2, 0, 0}, {4, 0, 0}, {8, 0, 0},
                                                {0, 1, 0}, {0, 2, 0}, {1, 1, 0}, {1, 1, 1},
                                                {2, 2, 2}};
  double worst_agree = 0.0;
  double worst_ref = 0.0;
  double worst_homog = 0.0;
  for (const auto& cs : cases) {
    for (const auto& x : pts) {
      const double closed = kernel_k_closed(cs.Q, cs.A, x);
      const KernelSynthesis syn = kernel_k_fourier(cs.Q, cs.A, x);
      csv.row({cs.name, fmt(x[0]), fmt(x[1]), fmt(x[2]), "closed-form", "0", fmt(closed),
               "0"});
      for (size_t i = 0; i < syn.eps.size(); ++i)
        csv.row({cs.name, fmt(x[0]), fmt(x[1]), fmt(x[2]), "fourier-synthesis",
                 fmt(syn.eps[i]), fmt(syn.values[i]), fmt(syn.err)});
      csv.row({cs.name, fmt(x[0]), fmt(x[1]), fmt(x[2]), "fourier-extrapolated", "0",
               fmt(syn.value), fmt(syn.err)});
      worst_agree = std::max(worst_agree, std::abs(closed - syn.value) / std::abs(closed));
      if (cs.name == "isotropic") {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        const double ref = 1.0 / (4.0 * std::numbers::pi * r);
        worst_ref = std::max(worst_ref, std::abs(closed - ref) / ref);
      }
      // homogeneity K(2x) = K(x)/2
      const std::vector<double> x2 = {2 * x[0], 2 * x[1], 2 * x[2]};
      const double k2 = kernel_k_closed(cs.Q, cs.A, x2);
      worst_homog = std::max(worst_homog, std::abs(k2 - 0.5 * closed) / std::abs(closed));
    }
  }
  summary.add(make_criterion("kernel-agreement",
                             "closed form vs Fourier synthesis within 1e-4 relative",
                             worst_agree, 1e-4, worst_agree < 1e-4));
  summary.add(make_criterion("kernel-reference", "Q=A=Id reproduces 1/(4 pi |x|)",
                             worst_ref, 1e-4, worst_ref < 1e-4));
  summary.add(make_criterion("kernel-homogeneity", "K(2x) = K(x)/2^{d-2}", worst_homog,
                             1e-12, worst_homog < 1e-12));

  // multiplier non-negativity on a sphere grid
  {
    double min_form = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(1.0 - z * z);
      const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
      const double p[3] = {rho * std::cos(ga * i), rho * std::sin(ga * i), z};
      for (const auto& cs : cases) {
        double num = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) num += p[a] * cs.Q[a * 3 + b] * p[b];
        min_form = std::min(min_form, num);
      }
    }
    summary.add(make_criterion("kernel-psd-multiplier",
                               "Fourier multiplier non-negative for PSD Q", min_form, 0.0,
                               min_form >= -1e-14));
  }

  // discrete-to-continuum comparison along the first axis
  {
    const std::vector<double> A = {1.0, 1.0, 1.0};
    const DiscreteContinuumReport d2c = discrete_vs_continuum_report(A, 0, 4, 32);
    Csv dcsv(dir / "discrete_continuum.csv", "r,discrete,continuum,diff,scaled");
    for (const auto& row : d2c.rows)
      dcsv.row({fmt(row.r), fmt(row.discrete), fmt(row.continuum), fmt(row.diff),
                fmt(row.scaled)});
    summary.add(make_criterion("d2c-exponent",
                               "|grad G_h - dG| decay exponent in [-3.5, -2.5]",
                               d2c.fit.exponent, -3.0,
                               d2c.fit.exponent >= -3.5 && d2c.fit.exponent <= -2.5));
    summary.add(make_criterion("d2c-bounded", "scaled difference max/min < 10",
                               d2c.scaled_ratio, 10.0, d2c.scaled_ratio < 10.0));
    // Green VALUES approach the continuum ones (the gradient ratio carries
    // the O(1/r) half-offset of the forward difference and converges slower)
    double worst = 0.0;
    for (int n : {16, 24, 32}) {
      const std::vector<int> x = {n, 0, 0};
      const std::vector<double> xd = {double(n), 0.0, 0.0};
      const double disc = lattice_green_inf(A, x).value;
      const double cont = continuum_green(A, xd);
      worst = std::max(worst, std::abs(disc / cont - 1.0));
    }
    summary.add(make_criterion("d2c-ratio", "discrete/continuum Green within 2% at r>=16",
                               worst, 0.02, worst < 0.02));
  }
  return summary;
}

// ---- two-scale battery ----

Summary run_two_scale_battery(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "two-scale-battery";
  const CoefficientMap map = cfg.coefficient_map();
  SolveConfig sc = cfg.solver;
  sc.tol = std::min(sc.tol, 1e-12);
  const TorusPtr torus = make_torus(cfg.dim, cfg.side);
  const double ah = arithmetic_mean_a(map);
  const int threads = cfg.effective_threads();

  // residual battery
  std::vector<ResidualReport> reports(cfg.samples);
  parallel_for_indexed(cfg.samples, threads, [&](int64_t n) {
    const Environment env = sample_environment(torus, map, cfg.seed, uint64_t(n));
    const CorrectorSet set = solve_correctors(env, 0.0, sc);
    const GreenColumn g0 = green_column(env, 0.0, 0, sc);
    const TwoScaleBundle b = build_bundle(env, set, g0, ah);
    reports[n] = residual_report(b);
  });
  Csv csv(dir / "residual_battery.csv", "sample,max_dev,mean,linf,solver_tol,pass");
  double worst = 0.0, worst_mean = 0.0;
  for (int64_t n = 0; n < cfg.samples; ++n) {
    worst = std::max(worst, reports[n].max_dev);
    worst_mean = std::max(worst_mean, std::abs(reports[n].mean));
    csv.row({std::to_string(n), fmt(reports[n].max_dev), fmt(reports[n].mean),
             fmt(reports[n].linf), fmt(sc.tol), reports[n].max_dev < 1e-8 ? "1" : "0"});
  }
  summary.add(make_criterion("residual-identity",
                             "max aligned residual < 1e-8 over the battery", worst, 1e-8,
                             worst < 1e-8));
  summary.add(make_criterion("residual-constant",
                             "mean-adjustment constant vanishes (matched sources)",
                             worst_mean, 1e-9, worst_mean < 1e-9));

  // representation identity on a 6^3 torus (dense Green matrix)
  {
    const TorusPtr t6 = make_torus(cfg.dim, 6);
    double worst_rep = 0.0;
    for (int s = 0; s < 2; ++s) {
      const Environment env = sample_environment(t6, map, cfg.seed + 1000, uint64_t(s));
      const CorrectorSet set = solve_correctors(env, 0.0, sc);
      const GreenColumn g0 = green_column(env, 0.0, 0, sc);
      const TwoScaleBundle b = build_bundle(env, set, g0, ah);
      worst_rep = std::max(worst_rep, representation_z_check(env, b).max_aligned_dev);
    }
    summary.add(make_criterion("representation", "Green-matrix representation of z at 6^3",
                               worst_rep, 1e-8, worst_rep < 1e-8));
  }

  // vertical derivative formulas vs central finite differences
  {
    const TorusPtr t8 = make_torus(cfg.dim, 8);
    const Environment env = sample_environment(t8, map, cfg.seed + 2000, 0);
    const double mu = 0.1;
    std::vector<int> xc(cfg.dim, 1);
    const int64_t xsite = t8->site_at(xc);
    const int64_t edge = t8->edge_index(t8->site_at(std::vector<int>(cfg.dim, 2)), 0);
    const int64_t ysite = 0;

    const double vc = vertical_derivative_corrector(env, mu, edge, xsite, cfg.xi, sc);
    const double vg = vertical_derivative_green(env, mu, edge, xsite, ysite, sc);
    Csv fcsv(dir / "fd_convergence.csv", "quantity,h,formula,fd,abs_err");
    std::vector<double> errs_c, errs_g;
    for (int k = 3; k <= 6; ++k) {
      const double h = std::pow(2.0, -k);
      const double fdc = fd_corrector_derivative(env, mu, edge, xsite, cfg.xi, h, sc);
      const double fdg = fd_green_derivative(env, mu, edge, xsite, ysite, h, sc);
      errs_c.push_back(std::abs(fdc - vc));
      errs_g.push_back(std::abs(fdg - vg));
      fcsv.row({"corrector", fmt(h), fmt(vc), fmt(fdc), fmt(errs_c.back())});
      fcsv.row({"green", fmt(h), fmt(vg), fmt(fdg), fmt(errs_g.back())});
    }
    auto observed_order = [](const std::vector<double>& errs) {
      std::vector<double> orders;
      for (size_t i = 0; i + 1 < errs.size(); ++i)
        if (errs[i + 1] > 0.0) orders.push_back(std::log2(errs[i] / errs[i + 1]));
      double m = 0.0;
      for (double o : orders) m += o;
      return orders.empty() ? 0.0 : m / orders.size();
    };
    const double oc = observed_order(errs_c);
    const double og = observed_order(errs_g);
    summary.add(make_criterion("fd-order-corrector",
                               "corrector derivative FD order 2.0 +- 0.2", oc, 2.0,
                               std::abs(oc - 2.0) <= 0.2));
    summary.add(make_criterion("fd-order-green", "Green derivative FD order 2.0 +- 0.2",
                               og, 2.0, std::abs(og - 2.0) <= 0.2));

    // mu -> 0 Cauchy behavior of the derivative values
    const double v1 = vertical_derivative_corrector(env, 1e-1, edge, xsite, cfg.xi, sc);
    const double v2 = vertical_derivative_corrector(env, 1e-2, edge, xsite, cfg.xi, sc);
    const double v3 = vertical_derivative_corrector(env, 1e-3, edge, xsite, cfg.xi, sc);
    const double gap1 = std::abs(v1 - v2), gap2 = std::abs(v2 - v3);
    summary.add(make_criterion("mu-cauchy", "vertical derivatives Cauchy as mu -> 0", gap2,
                               gap1, gap2 < gap1));
  }
  return summary;
}

// ---- conv-bounds ----

Summary run_conv_bounds(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "conv-bounds";
  Csv csv(dir / "conv_bounds.csv", "regime,alpha,beta,r,sum,scaled,tail_check");
  struct Regime {
    std::string name;
    double alpha, beta;
    bool log_num;
  };
  const std::vector<Regime> regimes = {
      {"alpha-gt-d", 4.0, 2.0, false},
      {"alpha-eq-d", 3.0, 2.0, false},
      {"log-numerator", 3.0, 2.0, true},
  };
  for (const auto& rg : regimes) {
    const ConvBoundReport rep = convolution_bound_check(
        rg.alpha, rg.beta, rg.log_num, cfg.dim, cfg.conv_radii, cfg.conv_cutoff_factor);
    for (const auto& row : rep.rows)
      csv.row({rg.name, fmt(rg.alpha), fmt(rg.beta), fmt(row.r), fmt(row.sum),
               fmt(row.scaled), fmt(row.tail_check)});
    summary.add(make_criterion("conv-" + rg.name,
                               "scaled supremum bounded (max/min < 20)", rep.scaled_ratio,
                               20.0, rep.scaled_ratio < 20.0 && !rep.cutoff_flagged));
  }
  return summary;
}

// ---- green-decay ----

Summary run_green_decay(const RunConfig& cfg, const fs::path& dir) {
  Summary summary;
  summary.experiment = "green-decay";
  const TorusPtr torus = make_torus(cfg.dim, cfg.side);
  const int d = cfg.dim;
  const Torus& T = *torus;
  const int threads = cfg.effective_threads();

  // quenched exponential decay at mu > 0, flat coefficients
  {
    const Environment env =
        sample_environment(torus, CoefficientMap::constant(1.0), cfg.seed, 0);
    const GreenColumn g = green_column(env, cfg.decay_mu, 0, cfg.solver);
    Csv csv(dir / "green_quenched.csv", "n,axis,sign,G");
    std::vector<double> xs, ys;
    const int n_hi = cfg.side / 4;
    for (int axis = 0; axis < d; ++axis) {
      for (int sign = -1; sign <= 1; sign += 2) {
        for (int n = 4; n <= n_hi; ++n) {
          std::vector<int> xc(d, 0);
          xc[axis] = sign * n;
          const double val = g.values.v[T.site_at(xc)];
          csv.row({std::to_string(n), std::to_string(axis), std::to_string(sign), fmt(val)});
          if (val > 0.0) {
            xs.push_back(n);
            ys.push_back(std::log(val));
          }
        }
      }
    }
    // linear fit of log G against |x|
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double nn = double(xs.size());
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / nn;
    double ss_res = 0, ss_tot = 0;
    const double ym = sy / nn;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double pred = icpt + slope * xs[i];
      ss_res += (ys[i] - pred) * (ys[i] - pred);
      ss_tot += (ys[i] - ym) * (ys[i] - ym);
    }
    const double r2 = 1.0 - ss_res / ss_tot;
    summary.add(make_criterion("quenched-rate", "log G linear in |x| with negative slope",
                               slope, 0.0, slope < 0.0));
    summary.add(make_criterion("quenched-r2", "exponential fit quality R^2 > 0.99", r2,
                               0.99, r2 > 0.99));
  }

  // annealed gradient decay over the environment ensemble
  {
    const CoefficientMap map = cfg.coefficient_map();
    // shells over edge base points, distance in [3, side/4]
    const double r_lo = 3.0, r_hi = cfg.side / 4.0;
    std::map<int64_t, int64_t> shell_ids;
    std::vector<int> xc(d);
    for (int64_t s = 0; s < T.sites(); ++s) {
      T.coords(s, xc.data());
      int64_t r2 = 0;
      for (int k = 0; k < d; ++k) {
        int c = xc[k];
        if (c > T.side() / 2) c -= T.side();
        r2 += int64_t(c) * c;
      }
      const double r = std::sqrt(double(r2));
      if (r >= r_lo && r <= r_hi) shell_ids.emplace(r2, 0);
    }
    int64_t next_id = 0;
    for (auto& [r2, id] : shell_ids) id = next_id++;
    std::vector<double> shell_r;
    for (auto& [r2, id] : shell_ids) shell_r.push_back(std::sqrt(double(r2)));
    std::vector<int64_t> site_shell(T.sites(), -1);
    std::vector<int64_t> shell_counts(next_id, 0);
    for (int64_t s = 0; s < T.sites(); ++s) {
      T.coords(s, xc.data());
      int64_t r2 = 0;
      for (int k = 0; k < d; ++k) {
        int c = xc[k];
        if (c > T.side() / 2) c -= T.side();
        r2 += int64_t(c) * c;
      }
      auto it = shell_ids.find(r2);
      if (it != shell_ids.end()) {
        site_shell[s] = it->second;
        shell_counts[it->second] += d;  // d edges per base point
      }
    }

    struct Acc {
      std::vector<double> grad2, hess2;
    };
    std::vector<Acc> accs(cfg.decay_samples);
    parallel_for_indexed(cfg.decay_samples, threads, [&](int64_t n) {
      const Environment env = sample_environment(torus, map, cfg.seed + 77, uint64_t(n));
      const GreenColumn g0 = green_column(env, 0.0, 0, cfg.solver);
      std::vector<int> e1(d, 0);
      e1[0] = 1;
      const GreenColumn g1 = green_column(env, 0.0, T.site_at(e1), cfg.solver);
      Acc acc;
      acc.grad2.assign(next_id, 0.0);
      acc.hess2.assign(next_id, 0.0);
      // v(x) = grad G(x, e') for the edge e' = (0 -> e_1)
      std::vector<double> v(T.sites());
      for (int64_t s = 0; s < T.sites(); ++s) v[s] = g1.values.v[s] - g0.values.v[s];
      for (int64_t s = 0; s < T.sites(); ++s) {
        const int64_t id = site_shell[s];
        if (id < 0) continue;
        for (int axis = 0; axis < d; ++axis) {
          const int64_t up = T.neighbor(s, axis, +1);
          const double ge = g0.values.v[up] - g0.values.v[s];
          const double he = v[up] - v[s];
          acc.grad2[id] += ge * ge;
          acc.hess2[id] += he * he;
        }
      }
      accs[n] = std::move(acc);
    });

    std::vector<double> grad_rms(next_id, 0.0), hess_rms(next_id, 0.0);
    for (int64_t n = 0; n < cfg.decay_samples; ++n)
      for (int64_t i = 0; i < next_id; ++i) {
        grad_rms[i] += accs[n].grad2[i];
        hess_rms[i] += accs[n].hess2[i];
      }
    Csv csv(dir / "green_annealed.csv", "r,grad_rms,hess_rms,edges");
    for (int64_t i = 0; i < next_id; ++i) {
      grad_rms[i] = std::sqrt(grad_rms[i] / double(shell_counts[i] * cfg.decay_samples));
      hess_rms[i] = std::sqrt(hess_rms[i] / double(shell_counts[i] * cfg.decay_samples));
      csv.row({fmt(shell_r[i]), fmt(grad_rms[i]), fmt(hess_rms[i]),
               std::to_string(shell_counts[i])});
    }
    const DecayFit gfit = decay_fit(shell_r, grad_rms, r_lo, r_hi);
    const DecayFit hfit = decay_fit(shell_r, hess_rms, r_lo, r_hi);
    summary.add(make_criterion("annealed-grad",
                               "E[|grad G|^2]^{1/2} decay exponent -(d-1) +- 0.3",
                               gfit.exponent, -(double(d) - 1.0),
                               std::abs(gfit.exponent + double(d) - 1.0) <= 0.3));
    summary.add(make_criterion("annealed-hess",
                               "E[|grad grad G|^2]^{1/2} decay exponent -d +- 0.4",
                               hfit.exponent, -double(d),
                               std::abs(hfit.exponent + double(d)) <= 0.4));
  }
  return summary;
}

}  // namespace

std::vector<std::string> experiment_names() {
  return {"verify",   "estimate-ah", "estimate-q",       "correlation-map",
          "kernel-k", "conv-bounds", "two-scale-battery", "green-decay"};
}

Summary run_experiment(const RunConfig& cfg, const std::string& experiment,
                       const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  Timer timer;
  Summary summary;
  if (experiment == "verify") {
    summary = run_verify(cfg, dir);
  } else if (experiment == "estimate-ah") {
    summary = run_estimate_ah(cfg, dir);
  } else if (experiment == "estimate-q") {
    summary = run_estimate_q(cfg, dir);
  } else if (experiment == "correlation-map") {
    summary = run_correlation_map(cfg, dir);
  } else if (experiment == "kernel-k") {
    summary = run_kernel_k(cfg, dir);
  } else if (experiment == "conv-bounds") {
    summary = run_conv_bounds(cfg, dir);
  } else if (experiment == "two-scale-battery") {
    summary = run_two_scale_battery(cfg, dir);
  } else if (experiment == "green-decay") {
    summary = run_green_decay(cfg, dir);
  } else {
    throw std::invalid_argument("unknown experiment '" + experiment + "'");
  }
  std::map<std::string, double> wall{{"total", timer.seconds()}};
  write_summary_files(dir, cfg, summary, wall);
  return summary;
}

}  // namespace corrlab
