#include "filter.hpp"

namespace safeguard {

std::string to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::nominal_passthrough: return "nominal_passthrough";
    case DecisionSource::nlp: return "nlp";
    case DecisionSource::shifted_fallback: return "shifted_fallback";
    case DecisionSource::fault_hold: return "fault_hold";
  }
  return "fault_hold";
}

namespace {

void hold(FilterDecision& d, SolverState& state) {
  d.source = DecisionSource::fault_hold;
  d.applied = state.last_verified.size() ? state.last_verified : d.nominal;
  state.plan.clear();
  ++state.faults;
}

}  // namespace

FilterDecision filter_step_nstep(const Vec& x, long k, const NominalPolicy& policy,
                                 const SafetyModel& model, const Margins& margins,
                                 const FilterConfig& cfg, SolverState& state) {
  const int n = cfg.horizon_n;
  FilterDecision d;
  d.nominal = policy(x, k);
  d.h = model.barrier.eval(x, k);

  std::vector<Vec> nominal_plan;
  // a rollout that blows up counts as unsafe
  try {
    RolloutResult r = check_nominal_rollout(model, margins, policy, x, k, n);
    d.rollout_min_slack = r.min_slack();
    if (r.safe && cfg.trigger_mode == TriggerMode::event_triggered) {
      d.applied = d.nominal;
      state.plan = std::move(r.controls);
      state.last_verified = d.applied;
      return d;
    }
    nominal_plan = std::move(r.controls);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numeric) throw;
    d.rollout_min_slack = -std::numeric_limits<double>::infinity();
  }

  d.triggered = true;
  ++state.solver_calls;
  std::optional<std::vector<Vec>> shifted;
  if (!state.plan.empty()) shifted = shifted_candidate(state.plan, model, margins, x, k, cfg);
  d.shifted_available = shifted.has_value();

  std::vector<Vec> warm;
  if (shifted) {
    warm = *shifted;
  } else if (!state.plan.empty()) {
    warm.assign(state.plan.begin() + 1, state.plan.end());
    warm.push_back(state.plan.back());
  }
  SfProblem problem{model, margins, x, k, n, d.nominal, std::move(warm), std::move(nominal_plan)};
  SfSolution sol = solve_sf(problem, cfg);
  d.solve_ms = sol.solve_ms;
  d.status = sol.status;
  if (sol.feasible()) {
    d.source = DecisionSource::nlp;
    d.applied = sol.controls[0];
    state.plan = std::move(sol.controls);
  } else if (shifted) {
    d.source = DecisionSource::shifted_fallback;
    d.status = SfStatus::fallback_shifted;
    d.applied = (*shifted)[0];
    state.plan = std::move(*shifted);
  } else {
    hold(d, state);
    return d;
  }
  state.last_verified = d.applied;
  return d;
}

FilterDecision filter_step_1step(const Vec& x, long k, const NominalPolicy& policy,
                                 const SafetyModel& model, double ld, const FilterConfig& cfg,
                                 SolverState& state) {
  const auto& a = model.barrier.boundary_layer_a;
  if (!a || !model.barrier.lh_k) {
    fail(ErrorCode::config, "1-step filter needs the barrier's boundary layer a and lh_k");
  }
  FilterDecision d;
  d.nominal = policy(x, k);
  d.h = model.barrier.eval(x, k);
  if (d.h > *a) {
    d.applied = d.nominal;
    state.last_verified = d.applied;
    return d;
  }
  d.triggered = true;
  ++state.solver_calls;
  SfSolution sol = solve_sf_1step(model, ld, x, k, d.nominal, cfg);
  d.solve_ms = sol.solve_ms;
  d.status = sol.status;
  if (sol.feasible()) {
    d.source = DecisionSource::nlp;
    d.applied = sol.controls[0];
  } else {
    // the barrier maximizer is the 1-step analogue of the shifted plan
    const SafetyModel barrier_only{model.plant, {}, model.barrier};
    const Margins m = one_step_margins(model, ld, cfg.margin_mode);
    auto cand = shifted_candidate({d.nominal}, barrier_only, m, x, k, cfg);
    d.shifted_available = cand.has_value();
    if (!cand) {
      hold(d, state);
      return d;
    }
    d.source = DecisionSource::shifted_fallback;
    d.status = SfStatus::fallback_shifted;
    d.applied = cand->front();
  }
  state.last_verified = d.applied;
  return d;
}

SafetyFilter::SafetyFilter(SafetyModel model, NominalPolicy policy, FilterConfig cfg, double ld,
                           FilterKind kind)
    : model_(std::move(model)), policy_(std::move(policy)), cfg_(cfg), ld_(ld), kind_(kind) {
  model_.validate();
  cfg_.validate();
  require(ld_ >= 0.0, "filter: ld must be >= 0");
  if (kind_ == FilterKind::onestep) {
    cfg_.horizon_n = 1;
    margins_ = one_step_margins(model_, ld_, cfg_.margin_mode);
  } else {
    margins_ = build_margins(model_, ld_, cfg_);
  }
}

FilterDecision SafetyFilter::step(const Vec& x, long k) {
  require(x.size() == model_.plant.n_states, "filter: state has wrong dimension");
  switch (kind_) {
    case FilterKind::nstep: return filter_step_nstep(x, k, policy_, model_, margins_, cfg_, state_);
    case FilterKind::onestep: return filter_step_1step(x, k, policy_, model_, ld_, cfg_, state_);
    case FilterKind::off: break;
  }
  FilterDecision d;
  d.nominal = policy_(x, k);
  d.applied = d.nominal;
  d.h = model_.barrier.eval(x, k);
  return d;
}

}  // namespace safeguard
