#include "doctest.h"
#include "filter.hpp"
#include "plants.hpp"

#include <random>

using namespace safeguard;

namespace {

NominalPolicy tracker(const PlantModel& plant, double gain, Vec ref, Vec offset) {
  PolicySpec s;
  s.kind = PolicyKind::proportional_tracker;
  s.gain = Mat::Identity(plant.n_inputs, plant.n_states) * gain;
  s.offset = offset;
  s.reference.steps = {{0, ref}};
  return NominalPolicy(s, plant);
}

}  // namespace

TEST_CASE("untriggered steps pass the nominal input through bitwise") {
  LipschitzOverrides lip;
  lip.ld = 0.00145;
  const auto b = make_plant("two_tank", {{"w_bar", "1e-3"}}, lip, 6);
  FilterConfig cfg;
  cfg.horizon_n = 6;
  const auto pol = tracker(b.model.plant, 4.0, Vec{{0.9, 0.8}}, Vec{{0.4, 0.0}});
  SafetyFilter f(b.model, pol, cfg, b.ld, FilterKind::nstep);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> x(0.3, 0.95);
  int passed = 0, fired = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec s{{x(rng), x(rng)}};
    const long k = i % 50;
    const FilterDecision d = f.step(s, k);
    if (!d.triggered) {
      ++passed;
      CHECK(d.source == DecisionSource::nominal_passthrough);
      CHECK(same(d.applied, pol(s, k)));
    } else {
      ++fired;
    }
  }
  CHECK(passed > 0);
  CHECK(fired > 0);
}

TEST_CASE("always-solve mode triggers every step") {
  const auto b = make_plant("two_tank", {}, {}, 6);
  FilterConfig cfg;
  cfg.horizon_n = 6;
  cfg.trigger_mode = TriggerMode::always_solve;
  SafetyFilter f(b.model, tracker(b.model.plant, 1.0, Vec{{0.63, 0.63}}, Vec{{0.4, 0.0}}), cfg, b.ld,
                 FilterKind::nstep);
  for (long k = 0; k < 5; ++k) CHECK(f.step(Vec{{0.63, 0.63}}, k).triggered);
  CHECK(f.state().solver_calls == 5);
}

TEST_CASE("off mode never intervenes") {
  const auto b = make_plant("two_tank", {}, {}, 6);
  FilterConfig cfg;
  const auto pol = tracker(b.model.plant, 4.0, Vec{{1.2, 1.2}}, Vec{{0.4, 0.0}});
  SafetyFilter f(b.model, pol, cfg, b.ld, FilterKind::off);
  const FilterDecision d = f.step(Vec{{0.99, 0.99}}, 0);
  CHECK_FALSE(d.triggered);
  CHECK(same(d.applied, pol(Vec{{0.99, 0.99}}, 0)));
}

TEST_CASE("infeasible start falls back to holding") {
  const auto b = make_plant("two_tank", {}, {}, 6);
  FilterConfig cfg;
  cfg.horizon_n = 6;
  SafetyFilter f(b.model, tracker(b.model.plant, 1.0, Vec{{0.63, 0.63}}, Vec{{0.4, 0.0}}), cfg, b.ld,
                 FilterKind::nstep);
  const FilterDecision d = f.step(Vec{{1.1, 0.6}}, 0);
  CHECK(d.source == DecisionSource::fault_hold);
  CHECK(f.state().faults == 1);
  CHECK(f.state().plan.empty());
}

TEST_CASE("1-step filter passes through outside the boundary layer") {
  const auto b = make_plant("integrator", {}, {}, 1);
  FilterConfig cfg;
  PolicySpec s;  // zero input
  const NominalPolicy pol(s, b.model.plant);
  SafetyFilter f(b.model, pol, cfg, b.ld, FilterKind::onestep);
  const double a = *b.model.barrier.boundary_layer_a;
  // h(0, 0) = eps > a
  FilterDecision d = f.step(Vec::Constant(1, 0.0), 0);
  CHECK_FALSE(d.triggered);
  CHECK(d.applied[0] == 0.0);
  // h = 0.2 - 0.16 = 0.04 <= a
  d = f.step(Vec::Constant(1, 0.4), 0);
  CHECK(d.triggered);
  CHECK(d.h <= a);
  const double e = 0.4 + 0.01 * d.applied[0] - 0.5 * std::sin(0.05);
  CHECK(0.2 - e * e >= 0.894 * 0.02 - 1e-8);
}
