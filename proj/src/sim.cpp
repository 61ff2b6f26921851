#include "sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace safeguard {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class F>
auto as_config_error(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::invalid_argument) throw;
    fail(ErrorCode::config, what + ": " + e.what());
  }
}

}  // namespace

ResolvedScenario resolve(const ScenarioConfig& cfg) {
  ResolvedScenario r;
  r.config = cfg;
  r.filter = cfg.filter;
  switch (cfg.mode) {
    case FilterMode::nstep: r.kind = FilterKind::nstep; break;
    case FilterMode::nonrobust:
      r.kind = FilterKind::nstep;
      r.filter.margin_mode = MarginMode::nominal;
      break;
    case FilterMode::onestep:
      r.kind = FilterKind::onestep;
      r.filter.horizon_n = 1;
      break;
    case FilterMode::off: r.kind = FilterKind::off; break;
  }
  r.bundle = as_config_error("plant", [&] { return make_plant(cfg.plant, cfg.plant_params, cfg.lipschitz, r.filter.horizon_n); });
  const PlantModel& plant = r.bundle.model.plant;
  if (cfg.x0.size() != plant.n_states) {
    fail(ErrorCode::config, "scenario.x0: expected " + std::to_string(plant.n_states) + " entries, got " +
                                std::to_string(cfg.x0.size()));
  }
  r.policy = as_config_error("nominal", [&] { return NominalPolicy(cfg.nominal, plant); });
  r.disturbance = cfg.disturbance;
  r.disturbance.ld = cfg.disturbance_ld.value_or(std::max(0.0, r.bundle.ld - r.bundle.model_error));
  as_config_error("disturbance", [&] { return Disturbance(r.disturbance, plant.n_states); });
  return r;
}

namespace {

void record_state(const SafetyModel& model, const Vec& x, long k, std::vector<double>& values, double& h,
                  double& min_slack) {
  values.clear();
  min_slack = std::numeric_limits<double>::infinity();
  for (const auto& c : model.constraints) {
    values.push_back(c.eval(x, k));
    min_slack = std::min(min_slack, values.back());
  }
  h = model.barrier.eval(x, k);
  if (model.constraints.empty()) min_slack = h;
}

}  // namespace

RunResult run_closed_loop(const ResolvedScenario& sc, std::optional<std::uint64_t> seed) {
  const SafetyModel& model = sc.bundle.model;
  const PlantModel& plant = model.plant;
  DisturbanceSpec spec = sc.disturbance;
  if (seed) spec.seed = *seed;
  const Disturbance dist(spec, plant.n_states);
  SafetyFilter filter(model, sc.policy, sc.filter, sc.bundle.ld, sc.kind);

  const Vec& x0 = sc.config.x0;
  for (const auto& c : model.constraints) {
    if (c.eval(x0, 0) < 0.0) {
      fail(ErrorCode::invalid_argument, "initial state is outside X(0): constraint '" + c.label + "' = " +
                                            num(c.eval(x0, 0)));
    }
  }
  if (sc.kind == FilterKind::onestep && model.barrier.eval(x0, 0) < 0.0) {
    fail(ErrorCode::invalid_argument, "initial state is outside C(0): h = " + num(model.barrier.eval(x0, 0)));
  }

  RunResult out;
  TrajectoryLog& log = out.log;
  log.n_states = plant.n_states;
  log.n_inputs = plant.n_inputs;
  for (const auto& c : model.constraints) log.labels.push_back(c.label);
  RunSummary& s = out.summary;

  Vec x = x0;
  const long steps = sc.config.steps;
  log.rows.reserve(static_cast<std::size_t>(steps));
  long k = 0;
  try {
    for (; k < steps; ++k) {
      TrajectoryRow row;
      row.k = k;
      row.x = x;
      record_state(model, x, k, row.constraints, row.h, row.min_slack);
      const FilterDecision dec = filter.step(x, k);
      if (k == 0 && sc.kind == FilterKind::nstep && dec.source == DecisionSource::fault_hold) {
        fail(ErrorCode::infeasible, "the safety-filter program is infeasible at k = 0 for the initial state");
      }
      row.u = dec.applied;
      row.u_nom = dec.nominal;
      row.triggered = dec.triggered;
      row.source = dec.source;
      row.status = dec.status;
      row.shifted_available = dec.shifted_available;
      row.solve_ms = dec.solve_ms;

      const Vec base = plant.truth(x, row.u, k);
      DisturbanceScore score;
      if (spec.kind == DisturbanceKind::adversarial) {
        // the corner that most reduces the smallest constraint value one step ahead
        score = [&](const Vec& d) {
          double m = std::numeric_limits<double>::infinity();
          const Vec next = base + d;
          for (const auto& c : model.constraints) m = std::min(m, c.eval(next, k + 1));
          return model.constraints.empty() ? model.barrier.eval(next, k + 1) : m;
        };
      }
      row.d = dist.realize(x, row.u, k, score);
      x = base + row.d;
      log.rows.push_back(std::move(row));
      if (!x.allFinite()) fail(ErrorCode::numeric, "state became non-finite at k = " + std::to_string(k + 1));
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numeric) throw;
    s.error = e.what();
    s.error_step = k;
  }
  log.final_state = x;
  if (x.allFinite()) {
    double unused = 0.0;
    record_state(model, x, static_cast<long>(log.rows.size()), log.final_constraints, log.final_h, unused);
  }

  const RunSummary partial = s;
  s = summarize(log);
  s.error = partial.error;
  s.error_step = partial.error_step;
  s.scenario = sc.config.name;
  s.seed = spec.seed;
  s.solver_calls = filter.state().solver_calls;
  s.faults = filter.state().faults;
  s.disturbance_ld = spec.ld;
  s.filter_ld = sc.bundle.ld;
  s.model_error = sc.bundle.model_error;
  return out;
}

RunResult run_closed_loop(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed) {
  return run_closed_loop(resolve(cfg), seed);
}

RunSummary summarize(const TrajectoryLog& log) {
  RunSummary s;
  s.steps = static_cast<long>(log.rows.size());
  s.min_h = std::numeric_limits<double>::infinity();
  for (const auto& label : log.labels) s.min_slack[label] = std::numeric_limits<double>::infinity();
  long triggered = 0;
  auto visit = [&](long k, const std::vector<double>& values, double h) {
    bool violated = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto& m = s.min_slack[log.labels[i]];
      m = std::min(m, values[i]);
      violated = violated || values[i] < 0.0;
    }
    s.min_h = std::min(s.min_h, h);
    if (values.empty()) violated = h < 0.0;
    if (violated) {
      ++s.violations;
      if (!s.first_violation) s.first_violation = k;
    }
  };
  for (const auto& row : log.rows) {
    visit(row.k, row.constraints, row.h);
    if (row.triggered) {
      ++triggered;
      ++s.solver_calls;
      s.total_solve_ms += row.solve_ms;
    }
    if (row.source == DecisionSource::fault_hold) ++s.faults;
    ++s.sources[to_string(row.source)];
  }
  if (log.final_state.size() && log.final_state.allFinite()) {
    visit(static_cast<long>(log.rows.size()), log.final_constraints, log.final_h);
  }
  s.trigger_fraction = log.rows.empty() ? 0.0 : double(triggered) / double(log.rows.size());
  s.avg_solve_ms = triggered ? s.total_solve_ms / double(triggered) : 0.0;
  return s;
}

std::string RunSummary::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["steps"] = steps;
  j["violations"] = violations;
  j["first_violation"] = first_violation ? nlohmann::json(*first_violation) : nlohmann::json(nullptr);
  j["min_slack"] = min_slack;
  j["min_h"] = min_h;
  j["trigger_fraction"] = trigger_fraction;
  j["solver_calls"] = solver_calls;
  j["total_solve_ms"] = total_solve_ms;
  j["avg_solve_ms"] = avg_solve_ms;
  j["faults"] = faults;
  j["sources"] = sources;
  j["disturbance_ld"] = disturbance_ld;
  j["filter_ld"] = filter_ld;
  j["model_error"] = model_error;
  j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
  j["error_step"] = error_step ? nlohmann::json(*error_step) : nlohmann::json(nullptr);
  return j.dump(2);
}

int worker_count(std::size_t jobs) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SAFEGUARD_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(hw, jobs)));
}

std::vector<RunResult> run_ensemble(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  const ResolvedScenario sc = resolve(cfg);
  std::vector<RunResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = run_closed_loop(sc, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = worker_count(seeds.size());
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::string trajectory_csv(const TrajectoryLog& log) {
  std::ostringstream o;
  o << "k";
  for (int i = 0; i < log.n_states; ++i) o << ",x" << i;
  for (int j = 0; j < log.n_inputs; ++j) o << ",u" << j;
  for (int j = 0; j < log.n_inputs; ++j) o << ",unom" << j;
  o << ",triggered,source,solve_ms,h,min_slack\n";
  for (const auto& r : log.rows) {
    o << r.k;
    for (long i = 0; i < r.x.size(); ++i) o << "," << num(r.x[i]);
    for (long j = 0; j < r.u.size(); ++j) o << "," << num(r.u[j]);
    for (long j = 0; j < r.u_nom.size(); ++j) o << "," << num(r.u_nom[j]);
    o << "," << (r.triggered ? 1 : 0) << "," << to_string(r.source) << "," << num(r.solve_ms) << ","
      << num(r.h) << "," << num(r.min_slack) << "\n";
  }
  if (log.final_state.size()) {
    // terminal state: no input applied
    o << log.rows.size();
    for (long i = 0; i < log.final_state.size(); ++i) o << "," << num(log.final_state[i]);
    for (int j = 0; j < 2 * log.n_inputs; ++j) o << ",";
    double m = log.final_h;
    if (!log.final_constraints.empty()) m = *std::min_element(log.final_constraints.begin(), log.final_constraints.end());
    o << ",0,,0," << num(log.final_h) << "," << num(m) << "\n";
  }
  return o.str();
}

std::string disturbance_csv(const TrajectoryLog& log) {
  std::ostringstream o;
  o << "k";
  for (int i = 0; i < log.n_states; ++i) o << ",d" << i;
  o << "\n";
  for (const auto& r : log.rows) {
    o << r.k;
    for (long i = 0; i < r.d.size(); ++i) o << "," << num(r.d[i]);
    o << "\n";
  }
  return o.str();
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::io, "write failed for '" + path + "'");
}

std::vector<std::string> write_run(const std::string& dir, const RunResult& run) {
  const std::filesystem::path d(dir);
  const std::vector<std::string> files = {(d / "trajectory.csv").string(), (d / "disturbance.csv").string(),
                                          (d / "summary.json").string()};
  write_text(files[0], trajectory_csv(run.log));
  write_text(files[1], disturbance_csv(run.log));
  write_text(files[2], run.summary.to_json());
  return files;
}

namespace {

GridBox scenario_grid(const ResolvedScenario& sc) {
  GridBox g = sc.bundle.cert_grid;
  const auto& c = sc.config.certify;
  if (c.lower.size()) g.lower = c.lower;
  if (c.upper.size()) g.upper = c.upper;
  if (!c.resolution.empty()) g.resolution = c.resolution;
  return g;
}

std::vector<long> scenario_ks(const ResolvedScenario& sc) {
  return sc.config.certify.k_samples.empty() ? sc.bundle.cert_ks : sc.config.certify.k_samples;
}

}  // namespace

CertReport certify_scenario(const ResolvedScenario& sc) {
  const int horizon = sc.kind == FilterKind::onestep ? 1 : sc.filter.horizon_n;
  return certify_grid(sc.bundle.model, sc.bundle.candidate, horizon, sc.bundle.ld, scenario_grid(sc),
                      scenario_ks(sc), sc.config.certify.tolerance);
}

SetCheckReport check_scenario_sets(const ResolvedScenario& sc) {
  FilterConfig f = sc.filter;
  if (sc.kind == FilterKind::onestep) f.horizon_n = 1;
  const Margins m = build_margins(sc.bundle.model, sc.bundle.ld, f);
  return check_tightened_sets(sc.bundle.model, m, scenario_grid(sc), scenario_ks(sc));
}

void write_manifest(const std::string& dir, const std::string& config_path, const std::string& command,
                    int exit_status, const std::vector<std::string>& artifacts) {
  nlohmann::json j;
  j["config"] = config_path;
  j["output_dir"] = dir;
  j["command"] = command;
  j["exit_status"] = exit_status;
  j["artifacts"] = artifacts;
  j["version"] = SAFEGUARD_VERSION;
  write_text((std::filesystem::path(dir) / "manifest.json").string(), j.dump(2));
}

}  // namespace safeguard
