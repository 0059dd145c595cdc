#include "corrlab.h"

#include <cstring>
#include <string>

#include "corrlab/experiments.hpp"
#include "corrlab/solver.hpp"

struct corrlab_run {
  corrlab::RunConfig config;
  std::string summary_json;
  std::string first_failure;
  std::string error;
  bool passed = false;
  bool executed = false;
};

namespace {

std::string g_default_config;
std::string g_experiments;
std::string g_version;

corrlab_status classify(const std::exception& e) {
  if (dynamic_cast<const corrlab::SolveFailure*>(&e)) return CORRLAB_ERR_SOLVER;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return CORRLAB_ERR_CONFIG;
  return CORRLAB_ERR_INTERNAL;
}

}  // namespace

extern "C" {

const char* corrlab_version(void) {
  if (g_version.empty()) g_version = corrlab::corrlab_version_string();
  return g_version.c_str();
}

const char* corrlab_status_name(corrlab_status status) {
  switch (status) {
    case CORRLAB_OK:
      return "ok";
    case CORRLAB_ERR_INVALID_ARG:
      return "invalid argument";
    case CORRLAB_ERR_CONFIG:
      return "configuration error";
    case CORRLAB_ERR_SOLVER:
      return "solver failure";
    case CORRLAB_ERR_IO:
      return "io error";
    case CORRLAB_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown";
}

const char* corrlab_default_config(void) {
  if (g_default_config.empty()) g_default_config = corrlab::default_config_json();
  return g_default_config.c_str();
}

const char* corrlab_experiments(void) {
  if (g_experiments.empty()) {
    for (const auto& name : corrlab::experiment_names()) {
      if (!g_experiments.empty()) g_experiments += ",";
      g_experiments += name;
    }
  }
  return g_experiments.c_str();
}

corrlab_status corrlab_run_create(const char* config_json, corrlab_run** out_run) {
  if (!out_run) return CORRLAB_ERR_INVALID_ARG;
  *out_run = nullptr;
  if (!config_json) return CORRLAB_ERR_INVALID_ARG;
  try {
    auto run = new corrlab_run;
    run->config = corrlab::parse_config(config_json);
    *out_run = run;
    return CORRLAB_OK;
  } catch (const std::exception&) {
    return CORRLAB_ERR_CONFIG;
  }
}

corrlab_status corrlab_config_check(const char* config_json, char* msg, size_t msg_len) {
  if (!config_json) return CORRLAB_ERR_INVALID_ARG;
  try {
    corrlab::parse_config(config_json);
    if (msg && msg_len) msg[0] = '\0';
    return CORRLAB_OK;
  } catch (const std::exception& e) {
    if (msg && msg_len) {
      std::strncpy(msg, e.what(), msg_len - 1);
      msg[msg_len - 1] = '\0';
    }
    return CORRLAB_ERR_CONFIG;
  }
}

corrlab_status corrlab_run_execute(corrlab_run* run, const char* experiment,
                                   const char* out_dir) {
  if (!run || !experiment || !out_dir) return CORRLAB_ERR_INVALID_ARG;
  run->error.clear();
  run->executed = false;
  bool known = false;
  for (const auto& name : corrlab::experiment_names()) known |= (name == experiment);
  if (!known) {
    run->error = std::string("unknown experiment '") + experiment + "'";
    return CORRLAB_ERR_INVALID_ARG;
  }
  try {
    const corrlab::Summary summary =
        corrlab::run_experiment(run->config, experiment, out_dir);
    run->summary_json = summary.to_json();
    run->first_failure = summary.first_failure();
    run->passed = summary.all_pass;
    run->executed = true;
    return CORRLAB_OK;
  } catch (const std::exception& e) {
    run->error = e.what();
    return classify(e);
  }
}

const char* corrlab_run_summary_json(const corrlab_run* run) {
  return (run && run->executed) ? run->summary_json.c_str() : "";
}

int corrlab_run_passed(const corrlab_run* run) {
  return (run && run->executed && run->passed) ? 1 : 0;
}

const char* corrlab_run_first_failure(const corrlab_run* run) {
  return (run && run->executed) ? run->first_failure.c_str() : "";
}

const char* corrlab_run_error(const corrlab_run* run) {
  return run ? run->error.c_str() : "";
}

void corrlab_run_destroy(corrlab_run* run) { delete run; }

}  // extern "C"
