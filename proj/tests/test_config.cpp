#include "doctest.h"
#include "config.hpp"

#include <filesystem>
#include <fstream>

using namespace safeguard;

namespace {

const char* kBase = R"(
[scenario]
name = demo
plant = two_tank
steps = 40
x0 = 0.63, 0.6
seeds = 3, 4

[plant]
w_bar = 1e-3

[lipschitz]
ld = 0.00145

[disturbance]
kind = adversarial
random_fraction = 0.25

[nominal]
kind = proportional_tracker
gain = 4, 0; 0, 4
offset = 0.4, 0
reference = 0: 0.9, 0.9; 20: 0.3, 0.3

[filter]
mode = nstep
horizon = 6
tol_feas = 1e-9

[certify]
resolution = 20, 20
k_samples = 0..3
)";

}  // namespace

TEST_CASE("parse fills every section") {
  const ScenarioConfig c = parse_config(kBase);
  CHECK(c.name == "demo");
  CHECK(c.steps == 40);
  CHECK(same(c.x0, Vec{{0.63, 0.6}}));
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(c.plant_params.at("w_bar") == "1e-3");
  CHECK(c.lipschitz.ld == 0.00145);
  CHECK(c.disturbance.kind == DisturbanceKind::adversarial);
  CHECK(c.disturbance.random_fraction == 0.25);
  CHECK(c.nominal.gain(1, 1) == 4.0);
  CHECK(c.nominal.reference.steps.size() == 2);
  CHECK(c.nominal.reference.steps[1].first == 20);
  CHECK(c.filter.horizon_n == 6);
  CHECK(c.filter.tol_feas == 1e-9);
  CHECK(c.certify.k_samples == std::vector<long>{0, 1, 2});
  CHECK(c.certify.resolution == std::vector<int>{20, 20});
}

TEST_CASE("serialize then parse round-trips") {
  const ScenarioConfig c = parse_config(kBase, {"nominal.reference_lead=2", "disturbance.ld=1e-3"});
  const ScenarioConfig again = parse_config(serialize_config(c));
  CHECK(again == c);
  CHECK(serialize_config(again) == serialize_config(c));
}

TEST_CASE("round trip for every shipped config") {
  for (const auto& entry : std::filesystem::directory_iterator(SG_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    const ScenarioConfig c = load_config(entry.path().string());
    CHECK(parse_config(serialize_config(c)) == c);
  }
}

TEST_CASE("overrides take precedence") {
  const ScenarioConfig c = parse_config(kBase, {"filter.mode=off", "scenario.steps=7", "plant.c1=0.7"});
  CHECK(c.mode == FilterMode::off);
  CHECK(c.steps == 7);
  CHECK(c.plant_params.at("c1") == "0.7");
}

TEST_CASE("schema errors carry the field name") {
  auto message = [](const std::string& text, std::vector<std::string> ov = {}) {
    try {
      parse_config(text, ov);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(kBase, {"filter.horizn=3"}).find("horizn") != std::string::npos);
  CHECK(message(kBase, {"bogus.key=1"}).find("bogus") != std::string::npos);
  CHECK(message(kBase, {"filter.horizon=zero"}).find("filter.horizon") != std::string::npos);
  CHECK(message(kBase, {"filter.mode=sometimes"}).find("sometimes") != std::string::npos);
  CHECK(message(kBase, {"disturbance.kind=storm"}).find("storm") != std::string::npos);
  CHECK(message(kBase, {"nominal.gain=1, 2; 3"}).find("gain") != std::string::npos);
  CHECK(message(kBase, {"noequals"}).find("noequals") != std::string::npos);
  CHECK_FALSE(message("[scenario]\nname = x\n").empty());
  CHECK_FALSE(message("[scenario\nplant=two_tank").empty());
}

TEST_CASE("missing file is an io error") {
  try {
    load_config("/nonexistent/dir/x.cfg");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("relative paths resolve against the config directory") {
  const auto dir = std::filesystem::temp_directory_path() / "sg_cfg_anchor";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.cfg";
  std::ofstream(path) << "[scenario]\nplant = integrator\nx0 = 0\n[disturbance]\nkind = file\nld = 0.01\npath = d.csv\n";
  const ScenarioConfig c = load_config(path.string());
  CHECK(c.disturbance.path == (dir / "d.csv").string());
}
