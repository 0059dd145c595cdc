// corrlab command-line driver. Talks to the shared library exclusively
// through the C API in corrlab.h.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "corrlab.h"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_set = false;
  int64_t samples = 0;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "configuration file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "seed override")->each([&](const std::string&) {
    flags.seed_set = true;
  });
  cmd->add_option("--samples", flags.samples, "sample count override");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
}

std::string build_config(const CommonFlags& flags) {
  nlohmann::json cfg;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg = nlohmann::json::parse(ss.str());  // syntax errors surface here
  } else {
    cfg = nlohmann::json::object();
  }
  if (flags.seed_set) cfg["seed"] = flags.seed;
  if (flags.samples > 0) cfg["samples"] = flags.samples;
  if (flags.threads >= 0) cfg["threads"] = flags.threads;
  return cfg.dump();
}

int execute(const std::string& experiment, const CommonFlags& flags) {
  std::string config;
  try {
    config = build_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  char msg[512];
  if (corrlab_config_check(config.c_str(), msg, sizeof(msg)) != CORRLAB_OK) {
    std::cerr << "error: " << msg << "\n";
    return 2;
  }

  corrlab_run* run = nullptr;
  corrlab_status st = corrlab_run_create(config.c_str(), &run);
  if (st != CORRLAB_OK) {
    std::cerr << "error: " << corrlab_status_name(st) << "\n";
    return 2;
  }

  st = corrlab_run_execute(run, experiment.c_str(), flags.out_dir.c_str());
  int rc = 0;
  if (st != CORRLAB_OK) {
    std::cerr << "error: " << corrlab_status_name(st) << ": " << corrlab_run_error(run)
              << "\n";
    rc = 2;
  } else {
    std::cout << corrlab_run_summary_json(run) << "\n";
    if (!corrlab_run_passed(run)) {
      std::cerr << "FAIL: criterion '" << corrlab_run_first_failure(run)
                << "' (see summary.json in " << flags.out_dir << ")\n";
      rc = 1;
    }
  }
  corrlab_run_destroy(run);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(corrlab_version()) +
               " - corrector correlation laboratory for random conductances"};
  app.require_subcommand(1);

  const struct {
    const char* name;
    const char* help;
  } experiments[] = {
      {"verify", "exact-identity and property suites"},
      {"estimate-ah", "homogenized matrix estimate"},
      {"estimate-q", "correlation-structure matrix estimate and diagnostics"},
      {"correlation-map", "empirical two-point map against the predicted kernel"},
      {"kernel-k", "deterministic kernel tables and cross-validation"},
      {"two-scale-battery", "residual identity and derivative-formula battery"},
      {"conv-bounds", "discrete convolution bound checks"},
      {"green-decay", "quenched and annealed Green-function decay fits"},
  };

  CommonFlags flags[sizeof(experiments) / sizeof(experiments[0])];
  std::string chosen;
  int idx = 0;
  for (const auto& e : experiments) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, flags[idx]);
    cmd->callback([&chosen, name = std::string(e.name)]() { chosen = name; });
    ++idx;
  }

  CLI::App* print_cfg = app.add_subcommand("default-config", "print the default configuration");
  print_cfg->callback([&chosen]() { chosen = "default-config"; });

  CLI11_PARSE(app, argc, argv);

  if (chosen == "default-config") {
    std::cout << corrlab_default_config() << "\n";
    return 0;
  }
  for (size_t i = 0; i < sizeof(experiments) / sizeof(experiments[0]); ++i) {
    if (chosen == experiments[i].name) return execute(chosen, flags[i]);
  }
  std::cerr << "error: no experiment selected\n";
  return 2;
}
