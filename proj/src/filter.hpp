#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "margins.hpp"
#include "rollout.hpp"
#include "solver.hpp"

namespace safeguard {

enum class DecisionSource { nominal_passthrough, nlp, shifted_fallback, fault_hold };
std::string to_string(DecisionSource s);

struct FilterDecision {
  Vec applied;
  Vec nominal;
  bool triggered = false;
  DecisionSource source = DecisionSource::nominal_passthrough;
  SfStatus status = SfStatus::optimal;
  double solve_ms = 0.0;
  double rollout_min_slack = 0.0;  // nominal rollout, N-step filter only
  bool shifted_available = false;  // a verified shifted candidate existed when triggered
  double h = 0.0;
};

/// Memory carried between steps of one closed-loop run.
struct SolverState {
  std::vector<Vec> plan;  // last verified control sequence
  Vec last_verified;
  long faults = 0;
  long solver_calls = 0;
};

/// Event-triggered N-step filter step.
FilterDecision filter_step_nstep(const Vec& x, long k, const NominalPolicy& policy,
                                 const SafetyModel& model, const Margins& margins,
                                 const FilterConfig& cfg, SolverState& state);

/// 1-step filter: passthrough while h(x, k) > a, otherwise the 1-step program.
FilterDecision filter_step_1step(const Vec& x, long k, const NominalPolicy& policy,
                                 const SafetyModel& model, double ld, const FilterConfig& cfg,
                                 SolverState& state);

enum class FilterKind { nstep, onestep, off };

/// Stateful wrapper owning the model, policy and margins of one run.
class SafetyFilter {
 public:
  SafetyFilter(SafetyModel model, NominalPolicy policy, FilterConfig cfg, double ld, FilterKind kind);

  FilterDecision step(const Vec& x, long k);
  void reset() { state_ = SolverState{}; }

  const SafetyModel& model() const { return model_; }
  const Margins& margins() const { return margins_; }
  const FilterConfig& config() const { return cfg_; }
  const NominalPolicy& policy() const { return policy_; }
  const SolverState& state() const { return state_; }
  FilterKind kind() const { return kind_; }
  double ld() const { return ld_; }

 private:
  SafetyModel model_;
  NominalPolicy policy_;
  FilterConfig cfg_;
  double ld_;
  FilterKind kind_;
  Margins margins_;
  SolverState state_;
};

}  // namespace safeguard
