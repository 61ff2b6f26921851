#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "margins.hpp"
#include "rollout.hpp"

namespace safeguard {

enum class SfStatus { optimal, feasible_suboptimal, fallback_shifted, infeasible };
std::string to_string(SfStatus s);

struct SfProblem {
  const SafetyModel& model;
  const Margins& margins;
  Vec x0;
  long k0 = 0;
  int horizon = 1;
  Vec u_nom0;
  std::vector<Vec> warm_start;    // optional, N inputs
  std::vector<Vec> nominal_plan;  // optional, N inputs
};

struct SfSolution {
  std::vector<Vec> controls;
  double objective = 0.0;  // ||u_nom0 - controls[0]||
  SfStatus status = SfStatus::infeasible;
  double max_violation = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
  int start_index = -1;

  bool feasible() const { return status != SfStatus::infeasible; }
};

/// Largest positive constraint residual of a rollout (0 when all slacks >= 0).
double max_violation(const RolloutResult& r);

/// N-step safety-filter program, single shooting over the stacked inputs.
SfSolution solve_sf(const SfProblem& problem, const FilterConfig& cfg);

/// 1-step program: min ||u_nom0 - u|| s.t. h(f(x0, u, k0), k0 + 1) >= lh_x * ld.
SfSolution solve_sf_1step(const SafetyModel& model, double ld, const Vec& x0, long k0,
                          const Vec& u_nom0, const FilterConfig& cfg);

/// Shift of a previous plan with a fresh terminal input that maximizes the
/// terminal barrier value; returned only if it verifies against the margins.
std::optional<std::vector<Vec>> shifted_candidate(const std::vector<Vec>& previous,
                                                  const SafetyModel& model, const Margins& margins,
                                                  const Vec& x_new, long k_new,
                                                  const FilterConfig& cfg);

}  // namespace safeguard
