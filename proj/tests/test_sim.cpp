#include "doctest.h"
#include "sim.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace safeguard;

namespace {

std::string cfg_path(const std::string& name) { return std::string(SG_CONFIG_DIR) + "/" + name; }

ScenarioConfig short_s2(long steps = 60) {
  ScenarioConfig c = load_config(cfg_path("two_tank_s2.cfg"));
  c.steps = steps;
  c.seeds.clear();
  c.disturbance.kind = DisturbanceKind::uniform_random;
  c.disturbance.seed = 8;
  return c;
}

bool same_logs(const TrajectoryLog& a, const TrajectoryLog& b) {
  if (a.rows.size() != b.rows.size() || !same(a.final_state, b.final_state)) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& r = a.rows[i];
    const auto& s = b.rows[i];
    if (!same(r.x, s.x) || !same(r.u, s.u) || !same(r.u_nom, s.u_nom) || !same(r.d, s.d)) return false;
    if (r.triggered != s.triggered || r.source != s.source) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("same seed, same log") {
  const auto a = run_closed_loop(short_s2());
  const auto b = run_closed_loop(short_s2());
  CHECK(same_logs(a.log, b.log));
  CHECK(trajectory_csv(a.log).size() > 0);
}

TEST_CASE("replaying a logged disturbance reproduces the run") {
  const auto first = run_closed_loop(short_s2());
  const auto dir = std::filesystem::temp_directory_path() / "sg_replay";
  write_run(dir.string(), first);
  ScenarioConfig c = short_s2();
  c.disturbance.kind = DisturbanceKind::file;
  c.disturbance.path = (dir / "disturbance.csv").string();
  const auto again = run_closed_loop(c);
  CHECK(same_logs(first.log, again.log));
}

TEST_CASE("trajectory csv layout") {
  const auto r = run_closed_loop(short_s2(5));
  const std::string csv = trajectory_csv(r.log);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "k,x0,x1,u0,u1,unom0,unom1,triggered,source,solve_ms,h,min_slack");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 6);  // T inputs plus the final state
  CHECK(last.rfind("5,", 0) == 0);
  CHECK(last.find(",,,,") != std::string::npos);
}

TEST_CASE("untriggered rows apply the nominal input") {
  const auto r = run_closed_loop(short_s2(80));
  for (const auto& row : r.log.rows) {
    if (!row.triggered) CHECK(same(row.u, row.u_nom));
  }
}

TEST_CASE("summary of a safe run") {
  const auto r = run_closed_loop(short_s2());
  CHECK(r.summary.violations == 0);
  CHECK_FALSE(r.summary.first_violation.has_value());
  CHECK(r.summary.min_slack.size() == 4);
  CHECK(r.summary.steps == 60);
  CHECK(r.summary.trigger_fraction < 1.0);
}

TEST_CASE("always-solve trigger fraction is one") {
  ScenarioConfig c = short_s2(15);
  c.filter.trigger_mode = TriggerMode::always_solve;
  CHECK(run_closed_loop(c).summary.trigger_fraction == 1.0);
}

TEST_CASE("unfiltered integrator leaves the tube, 1-step filter keeps it") {
  const auto off = run_closed_loop(load_config(cfg_path("integrator_unfiltered.cfg")));
  CHECK(off.summary.violations > 0);
  CHECK(off.summary.first_violation.has_value());
  const auto on = run_closed_loop(load_config(cfg_path("integrator_onestep.cfg"), {"nominal.kind=zero"}));
  CHECK(on.summary.violations == 0);
  CHECK(on.summary.min_h >= 0.0);
}

TEST_CASE("bad initial states are rejected before the run") {
  CHECK_THROWS_AS(run_closed_loop(load_config(cfg_path("two_tank_s1.cfg"), {"scenario.x0=1.1, 0.6"})), Error);
  CHECK_THROWS_AS(run_closed_loop(load_config(cfg_path("integrator_onestep.cfg"), {"scenario.x0=0.9"})), Error);
  try {
    // inside X(0) but the filter program has no solution
    run_closed_loop(load_config(cfg_path("two_tank_s2.cfg"), {"scenario.x0=0.9999, 0.99", "scenario.seeds="}));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::infeasible);
  }
}

TEST_CASE("numeric blow-up ends the run with an error record") {
  ResolvedScenario sc = resolve(load_config(cfg_path("integrator_unfiltered.cfg"), {"scenario.steps=50"}));
  sc.bundle.model.plant.truth_step = [](const Vec& x, const Vec& u, long k) {
    return k == 7 ? Vec::Constant(1, NAN) : Vec(x + 0.01 * u);
  };
  const auto r = run_closed_loop(sc);
  REQUIRE(r.summary.error.has_value());
  CHECK(r.log.rows.size() == 8);
  CHECK(r.summary.to_json().find("error_step") != std::string::npos);
}

TEST_CASE("ensemble runs come back in seed order") {
  ScenarioConfig c = short_s2(20);
  const auto runs = run_ensemble(c, {5, 6, 7});
  REQUIRE(runs.size() == 3);
  CHECK(runs[1].summary.seed == 6);
  CHECK(same_logs(runs[2].log, run_closed_loop(c, 7).log));
}

TEST_CASE("exhausted building forecast file is an io error") {
  const auto dir = std::filesystem::temp_directory_path() / "sg_what";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "w.csv") << "k,w0,w1,w2,w3\n0,0,0,0,0\n1,0,0,0,0\n";
  try {
    run_closed_loop(load_config(cfg_path("building_worstcase.cfg"),
                                {"plant.w_hat_path=" + (dir / "w.csv").string(), "scenario.steps=20"}));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("manifest lists existing artifacts") {
  const auto dir = (std::filesystem::temp_directory_path() / "sg_manifest").string();
  const auto files = write_run(dir, run_closed_loop(short_s2(5)));
  write_manifest(dir, "x.cfg", "simulate", 0, files);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
}
