#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "corrlab.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "corrlab_capi" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("version, status names and experiment list") {
  CHECK(std::string(corrlab_version()).find("corrlab") != std::string::npos);
  CHECK(std::string(corrlab_status_name(CORRLAB_OK)) == "ok");
  CHECK(std::string(corrlab_status_name(CORRLAB_ERR_CONFIG)) == "configuration error");
  const std::string exps = corrlab_experiments();
  CHECK(exps.find("verify") != std::string::npos);
  CHECK(exps.find("correlation-map") != std::string::npos);
}

TEST_CASE("the default configuration is accepted by the validator") {
  char msg[256];
  CHECK(corrlab_config_check(corrlab_default_config(), msg, sizeof(msg)) == CORRLAB_OK);
}

TEST_CASE("configuration errors carry the offending key path") {
  char msg[256];
  const corrlab_status st =
      corrlab_config_check(R"({"solver": {"tolerance": 1e-9}})", msg, sizeof(msg));
  CHECK(st == CORRLAB_ERR_CONFIG);
  CHECK(std::string(msg).find("solver.tolerance") != std::string::npos);
  CHECK(corrlab_config_check("{oops", msg, sizeof(msg)) == CORRLAB_ERR_CONFIG);
}

TEST_CASE("null arguments are rejected, not crashed on") {
  CHECK(corrlab_run_create(nullptr, nullptr) == CORRLAB_ERR_INVALID_ARG);
  corrlab_run* run = nullptr;
  CHECK(corrlab_run_create(nullptr, &run) == CORRLAB_ERR_INVALID_ARG);
  CHECK(run == nullptr);
  CHECK(corrlab_config_check(nullptr, nullptr, 0) == CORRLAB_ERR_INVALID_ARG);
  CHECK(std::string(corrlab_run_summary_json(nullptr)) == "");
  CHECK(corrlab_run_passed(nullptr) == 0);
  corrlab_run_destroy(nullptr);
}

TEST_CASE("a full experiment runs through the C API") {
  corrlab_run* run = nullptr;
  const char* cfg = R"({"conv_bounds": {"radii": [16], "cutoff_factor": 16}})";
  REQUIRE(corrlab_run_create(cfg, &run) == CORRLAB_OK);
  const fs::path dir = fresh_dir("conv");
  CHECK(corrlab_run_execute(run, "conv-bounds", dir.string().c_str()) == CORRLAB_OK);
  CHECK(corrlab_run_passed(run) == 1);
  CHECK(std::string(corrlab_run_first_failure(run)).empty());
  const std::string summary = corrlab_run_summary_json(run);
  CHECK(summary.find("conv-alpha-gt-d") != std::string::npos);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "manifest.json"));

  // unknown experiment name
  CHECK(corrlab_run_execute(run, "nope", dir.string().c_str()) ==
        CORRLAB_ERR_INVALID_ARG);
  CHECK(std::string(corrlab_run_error(run)).find("nope") != std::string::npos);
  corrlab_run_destroy(run);
}

TEST_CASE("identical configs give byte-identical tables through the API") {
  const char* cfg =
      R"({"side": 6, "samples": 3, "q_estimation": {"side": 4, "samples": 2, "nodes": 2},
          "analysis": {"moments": false}})";
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  for (const fs::path& dir : {d1, d2}) {
    corrlab_run* run = nullptr;
    REQUIRE(corrlab_run_create(cfg, &run) == CORRLAB_OK);
    CHECK(corrlab_run_execute(run, "correlation-map", dir.string().c_str()) == CORRLAB_OK);
    corrlab_run_destroy(run);
  }
  CHECK(slurp(d1 / "correlation.csv") == slurp(d2 / "correlation.csv"));
}

TEST_CASE("bad configs fail at run creation") {
  corrlab_run* run = nullptr;
  CHECK(corrlab_run_create(R"({"dim": 1})", &run) == CORRLAB_ERR_CONFIG);
  CHECK(run == nullptr);
}
