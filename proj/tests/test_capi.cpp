#include "doctest.h"
#include "safeguard/safeguard.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

namespace {

std::string cfg(const char* name) { return std::string(SG_CONFIG_DIR) + "/" + name; }

int calls = 0;

int hold_level(const double* x, size_t n, long, double* u, size_t m, void* user) {
  ++calls;
  const double gain = *static_cast<double*>(user);
  if (n != 1 || m != 1) return 1;
  u[0] = -gain * x[0];
  return 0;
}

int broken(const double*, size_t, long, double*, size_t, void*) { return 7; }

}  // namespace

TEST_CASE("version and margin helpers") {
  CHECK(std::strlen(sg_version()) > 0);
  CHECK(std::abs(sg_terminal_margin(1.331, 5.42e-5, 1.205, 20) - 2.494e-3) < 1e-6);
  CHECK(std::abs(sg_stage_margin(1.0, 0.00145, 1.205, 6) - 0.014581) < 1e-6);
  CHECK(std::abs(sg_boundary_layer(0.894, 0.11, 0.02, 0.072) - 0.18822) < 1e-12);
  CHECK(std::isnan(sg_terminal_margin(1.0, 0.1, 1.0, 0)));
  CHECK(std::strlen(sg_last_error()) > 0);
}

TEST_CASE("load errors set status and message") {
  sg_scenario* s = nullptr;
  CHECK(sg_scenario_load("/nonexistent/x.cfg", nullptr, 0, &s) == SG_ERR_IO);
  CHECK(s == nullptr);
  CHECK(std::string(sg_last_error()).find("x.cfg") != std::string::npos);
  const char* bad[] = {"filter.horizn=2"};
  CHECK(sg_scenario_load(cfg("two_tank_s1.cfg").c_str(), bad, 1, &s) == SG_ERR_CONFIG);
  CHECK(sg_scenario_load(nullptr, nullptr, 0, &s) == SG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("scenario dims and serialization") {
  sg_scenario* s = nullptr;
  REQUIRE(sg_scenario_load(cfg("building_worstcase.cfg").c_str(), nullptr, 0, &s) == SG_OK);
  size_t n = 0, m = 0;
  CHECK(sg_scenario_dims(s, &n, &m) == SG_OK);
  CHECK(n == 4);
  CHECK(m == 1);
  char* text = nullptr;
  REQUIRE(sg_scenario_serialize(s, &text) == SG_OK);
  sg_scenario* again = nullptr;
  CHECK(sg_scenario_parse(text, nullptr, 0, &again) == SG_OK);
  sg_string_free(text);
  sg_scenario_free(again);
  char* report = nullptr;
  int pass = 0;
  REQUIRE(sg_margins_report(s, &report, &pass) == SG_OK);
  CHECK(pass == 1);
  CHECK(std::string(report).find("terminal = 0.4995") != std::string::npos);
  sg_string_free(report);
  sg_scenario_free(s);
}

TEST_CASE("filter with a caller policy") {
  sg_scenario* s = nullptr;
  REQUIRE(sg_scenario_load(cfg("integrator_onestep.cfg").c_str(), nullptr, 0, &s) == SG_OK);
  double gain = 3.0;
  sg_filter* f = nullptr;
  REQUIRE(sg_filter_create(s, hold_level, &gain, &f) == SG_OK);
  double x = 0.0, u = 1.0;
  sg_step_info info{};
  calls = 0;
  REQUIRE(sg_filter_step(f, &x, 0, &u, &info) == SG_OK);
  CHECK(info.triggered == 0);
  CHECK(info.source == SG_SOURCE_NOMINAL);
  CHECK(u == -0.0);
  CHECK(calls >= 1);
  x = 0.4;  // inside the boundary layer
  REQUIRE(sg_filter_step(f, &x, 0, &u, &info) == SG_OK);
  CHECK(info.triggered == 1);
  CHECK(info.h < 0.18822);
  sg_filter_free(f);

  REQUIRE(sg_filter_create(s, broken, nullptr, &f) == SG_OK);
  CHECK(sg_filter_step(f, &x, 0, &u, &info) == SG_ERR_INVALID_ARGUMENT);
  sg_filter_free(f);
  sg_scenario_free(s);
}

TEST_CASE("simulate and certify write their files") {
  const auto dir = (std::filesystem::temp_directory_path() / "sg_capi_run").string();
  sg_scenario* s = nullptr;
  const char* ov[] = {"scenario.steps=300"};
  REQUIRE(sg_scenario_load(cfg("integrator_unfiltered.cfg").c_str(), ov, 1, &s) == SG_OK);
  sg_run_stats st{};
  char* files = nullptr;
  REQUIRE(sg_simulate(s, dir.c_str(), &st, &files) == SG_OK);
  CHECK(st.runs == 1);
  CHECK(st.steps == 300);
  CHECK(st.violations > 0);
  CHECK(std::string(files).find("trajectory.csv") != std::string::npos);
  CHECK(sg_write_manifest(dir.c_str(), "integrator_unfiltered.cfg", "simulate", 2, files) == SG_OK);
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  sg_string_free(files);

  sg_cert_stats cs{};
  REQUIRE(sg_certify(s, dir.c_str(), &cs, nullptr) == SG_OK);
  CHECK(cs.pass == 1);
  CHECK(cs.max_abs_input <= 9.28);
  CHECK(std::filesystem::exists(dir + "/certificate.json"));
  sg_scenario_free(s);
}
