#include "rollout.hpp"

#include <algorithm>

namespace safeguard {

namespace {

void check_state(const Vec& x, int l) {
  if (!x.allFinite()) {
    fail(ErrorCode::numeric, "prediction produced a non-finite state at stage " + std::to_string(l));
  }
}

void fill_slacks(const SafetyModel& model, const Margins& margins, long k0, RolloutResult& r) {
  const int n = static_cast<int>(r.controls.size());
  r.stage_slacks.assign(model.constraints.size(), std::vector<double>(static_cast<std::size_t>(n)));
  for (std::size_t i = 0; i < model.constraints.size(); ++i) {
    for (int l = 0; l < n; ++l) {
      const double margin = margins.stage.empty() ? 0.0 : margins.at(i, l);
      r.stage_slacks[i][l] = model.constraints[i].eval(r.states[l], k0 + l) - margin;
    }
  }
  r.terminal_slack = model.barrier.eval(r.states[n], k0 + n) - margins.terminal;
  r.safe = r.min_slack() >= 0.0;
}

}  // namespace

std::vector<Vec> predict(const PlantModel& plant, const Vec& x0, const std::vector<Vec>& controls,
                         long k0) {
  require(x0.size() == plant.n_states, "predict: initial state has wrong dimension");
  check_state(x0, 0);
  std::vector<Vec> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (std::size_t l = 0; l < controls.size(); ++l) {
    require(controls[l].size() == plant.n_inputs, "predict: control has wrong dimension");
    states.push_back(plant.step(states.back(), controls[l], k0 + static_cast<long>(l)));
    check_state(states.back(), static_cast<int>(l) + 1);
  }
  return states;
}

double RolloutResult::min_slack() const {
  double m = terminal_slack;
  for (const auto& row : stage_slacks) {
    for (double s : row) m = std::min(m, s);
  }
  return m;
}

RolloutResult evaluate_controls(const SafetyModel& model, const Margins& margins, const Vec& x0,
                                long k0, const std::vector<Vec>& controls) {
  require(!controls.empty(), "evaluate_controls: empty control sequence");
  RolloutResult r;
  r.controls = controls;
  r.states = predict(model.plant, x0, controls, k0);
  fill_slacks(model, margins, k0, r);
  return r;
}

RolloutResult check_nominal_rollout(const SafetyModel& model, const Margins& margins,
                                    const NominalPolicy& policy, const Vec& x0, long k0, int n) {
  require(n >= 1, "rollout horizon must be >= 1");
  require(x0.size() == model.plant.n_states, "rollout: initial state has wrong dimension");
  check_state(x0, 0);
  RolloutResult r;
  r.states.reserve(static_cast<std::size_t>(n) + 1);
  r.states.push_back(x0);
  for (int l = 0; l < n; ++l) {
    r.controls.push_back(policy(r.states.back(), k0 + l));
    r.states.push_back(model.plant.step(r.states.back(), r.controls.back(), k0 + l));
    check_state(r.states.back(), l + 1);
  }
  fill_slacks(model, margins, k0, r);
  return r;
}

}  // namespace safeguard
