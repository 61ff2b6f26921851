#pragma once

#include <vector>

#include "core.hpp"
#include "margins.hpp"

namespace safeguard {

/// Undisturbed prediction x_{l+1} = f(x_l, u_l, k0 + l); returns N+1 states.
std::vector<Vec> predict(const PlantModel& plant, const Vec& x0, const std::vector<Vec>& controls,
                         long k0);

struct RolloutResult {
  std::vector<Vec> states;
  std::vector<Vec> controls;
  std::vector<std::vector<double>> stage_slacks;  // [constraint][l], l = 0..N-1
  double terminal_slack = 0.0;
  bool safe = false;

  double min_slack() const;
};

/// Slacks of a given control sequence against the tightened sets.
RolloutResult evaluate_controls(const SafetyModel& model, const Margins& margins, const Vec& x0,
                                long k0, const std::vector<Vec>& controls);

/// Rolls the nominal policy forward on the predicted states and checks every
/// predicted state against its tightened set. Membership is exact (>= 0).
RolloutResult check_nominal_rollout(const SafetyModel& model, const Margins& margins,
                                    const NominalPolicy& policy, const Vec& x0, long k0, int n);

}  // namespace safeguard
