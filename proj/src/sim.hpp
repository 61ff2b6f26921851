#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "certify.hpp"
#include "config.hpp"
#include "filter.hpp"
#include "plants.hpp"

namespace safeguard {

/// A scenario with its plant, policy and disturbance built.
struct ResolvedScenario {
  ScenarioConfig config;
  PlantBundle bundle;
  NominalPolicy policy;
  DisturbanceSpec disturbance;  // ld filled in
  FilterConfig filter;          // margin mode adjusted for the nonrobust mode
  FilterKind kind = FilterKind::nstep;
};

ResolvedScenario resolve(const ScenarioConfig& cfg);

struct TrajectoryRow {
  long k = 0;
  Vec x, u, u_nom, d;
  bool triggered = false;
  DecisionSource source = DecisionSource::nominal_passthrough;
  SfStatus status = SfStatus::optimal;
  bool shifted_available = false;
  double solve_ms = 0.0;
  double h = 0.0;
  double min_slack = 0.0;  // min_i b_i(x_k, k)
  std::vector<double> constraints;
};

struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;  // k = 0..T-1
  Vec final_state;
  double final_h = 0.0;
  std::vector<double> final_constraints;
  std::vector<std::string> labels;
  int n_states = 0, n_inputs = 0;
};

struct RunSummary {
  std::string scenario;
  std::uint64_t seed = 0;
  long steps = 0;
  long violations = 0;  // states x_k, k = 0..T, with some b_i < 0
  std::optional<long> first_violation;
  std::map<std::string, double> min_slack;  // per constraint label
  double min_h = 0.0;
  double trigger_fraction = 0.0;
  long solver_calls = 0;
  double total_solve_ms = 0.0;
  double avg_solve_ms = 0.0;
  long faults = 0;
  std::map<std::string, long> sources;
  double disturbance_ld = 0.0;
  double filter_ld = 0.0;
  double model_error = 0.0;
  std::optional<std::string> error;
  std::optional<long> error_step;

  std::string to_json() const;
};

RunSummary summarize(const TrajectoryLog& log);

struct RunResult {
  TrajectoryLog log;
  RunSummary summary;
};

/// Closed loop x+ = truth(x, u, k) + d_k with the configured filter. Checks the
/// initial state first and throws on a bad start; a numeric blow-up mid-run
/// ends the run with an error record in the summary.
RunResult run_closed_loop(const ResolvedScenario& scenario, std::optional<std::uint64_t> seed = {});
RunResult run_closed_loop(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed = {});

/// Runs one closed loop per seed in parallel (SAFEGUARD_THREADS caps workers);
/// results come back in seed order.
std::vector<RunResult> run_ensemble(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds);

int worker_count(std::size_t jobs);

std::string trajectory_csv(const TrajectoryLog& log);
std::string disturbance_csv(const TrajectoryLog& log);

/// Writes trajectory.csv, disturbance.csv and summary.json under dir; returns the paths.
std::vector<std::string> write_run(const std::string& dir, const RunResult& run);

/// Certification of the scenario's candidate over its grid.
CertReport certify_scenario(const ResolvedScenario& scenario);

/// Nonempty tightened-set check over the certification grid for a window of time indices.
SetCheckReport check_scenario_sets(const ResolvedScenario& scenario);

void write_text(const std::string& path, const std::string& text);
void write_manifest(const std::string& dir, const std::string& config_path, const std::string& command,
                    int exit_status, const std::vector<std::string>& artifacts);

}  // namespace safeguard
