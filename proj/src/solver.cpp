#include "solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "nlp.hpp"

namespace safeguard {

std::string to_string(SfStatus s) {
  switch (s) {
    case SfStatus::optimal: return "optimal";
    case SfStatus::feasible_suboptimal: return "feasible_suboptimal";
    case SfStatus::fallback_shifted: return "fallback_shifted";
    case SfStatus::infeasible: return "infeasible";
  }
  return "infeasible";
}

double max_violation(const RolloutResult& r) { return std::max(0.0, -r.min_slack()); }

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Single-shooting transcription over z in [0,1]^{mN}; u = lower + z * range.
class Shooting {
 public:
  Shooting(const SfProblem& p, double backoff)
      : p_(p),
        plant_(p.model.plant),
        m_(plant_.n_inputs),
        horizon_(p.horizon),
        nc_(static_cast<int>(p.model.constraints.size())),
        lower_(plant_.input_lower),
        range_(plant_.input_upper - plant_.input_lower),
        backoff_(backoff) {
    scale_ = std::max(range_.maxCoeff(), 1e-12);
  }

  int n_vars() const { return m_ * horizon_; }
  int n_cons() const { return (horizon_ - 1) * nc_ + 1; }

  std::vector<Vec> decode(const Vec& z) const {
    std::vector<Vec> u(static_cast<std::size_t>(horizon_));
    for (int l = 0; l < horizon_; ++l) {
      u[l] = lower_ + z.segment(l * m_, m_).cwiseProduct(range_);
      u[l] = u[l].cwiseMin(plant_.input_upper);
    }
    return u;
  }

  Vec encode(const std::vector<Vec>& u) const {
    Vec z(n_vars());
    for (int l = 0; l < horizon_; ++l) {
      for (int j = 0; j < m_; ++j) {
        z[l * m_ + j] = range_[j] > 0.0 ? (u[l][j] - lower_[j]) / range_[j] : 0.0;
      }
    }
    return z.cwiseMax(0.0).cwiseMin(1.0);
  }

  double eval(const Vec& z, Vec& c) const {
    const auto u = decode(z);
    const auto x = predict(plant_, p_.x0, u, p_.k0);
    c.resize(n_cons());
    for (int l = 1; l < horizon_; ++l) {
      for (int i = 0; i < nc_; ++i) {
        c[(l - 1) * nc_ + i] = p_.model.constraints[i].eval(x[l], p_.k0 + l) - p_.margins.at(i, l) - backoff_;
      }
    }
    c[(horizon_ - 1) * nc_] =
        p_.model.barrier.eval(x[horizon_], p_.k0 + horizon_) - p_.margins.terminal - backoff_;
    return objective(u[0]);
  }

  Vec weighted_gradient(const Vec& z, const Vec& w) const {
    const auto u = decode(z);
    const auto x = predict(plant_, p_.x0, u, p_.k0);
    Vec grad = Vec::Zero(n_vars());
    Vec costate = w[(horizon_ - 1) * nc_] * gradient_of(p_.model.barrier, x[horizon_], p_.k0 + horizon_);
    for (int l = horizon_ - 1; l >= 0; --l) {
      const StepJacobian jac = plant_jacobian(plant_, x[l], u[l], p_.k0 + l);
      grad.segment(l * m_, m_) = (jac.du.transpose() * costate).cwiseProduct(range_);
      if (l == 0) break;
      Vec next = jac.dx.transpose() * costate;
      for (int i = 0; i < nc_; ++i) {
        const double wi = w[(l - 1) * nc_ + i];
        if (wi != 0.0) next += wi * gradient_of(p_.model.constraints[i], x[l], p_.k0 + l);
      }
      costate = std::move(next);
    }
    grad.head(m_) += (u[0] - p_.u_nom0).cwiseProduct(range_) / (scale_ * scale_);
    return grad;
  }

 private:
  double objective(const Vec& u0) const {
    return 0.5 * ((u0 - p_.u_nom0) / scale_).squaredNorm();
  }

  const SfProblem& p_;
  const PlantModel& plant_;
  int m_, horizon_, nc_;
  Vec lower_, range_;
  double scale_ = 1.0;
  double backoff_;
};

struct Verified {
  bool ok = false;
  double violation = std::numeric_limits<double>::infinity();
};

Verified verify(const SfProblem& p, const std::vector<Vec>& u, double tol) {
  try {
    const RolloutResult r = evaluate_controls(p.model, p.margins, p.x0, p.k0, u);
    const double v = max_violation(r);
    return {v <= tol, v};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numeric) throw;
    return {};
  }
}

}  // namespace

SfSolution solve_sf(const SfProblem& p, const FilterConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const PlantModel& plant = p.model.plant;
  require(p.horizon >= 1, "solve_sf: horizon must be >= 1");
  require(p.x0.size() == plant.n_states, "solve_sf: x0 has wrong dimension");
  require(p.u_nom0.size() == plant.n_inputs, "solve_sf: u_nom0 has wrong dimension");
  require(p.margins.stage.size() == p.model.constraints.size(), "solve_sf: margin table mismatch");
  require(p.model.constraints.empty() || p.margins.horizon >= p.horizon,
          "solve_sf: margins built for a shorter horizon");
  const Vec u_nom0 = clamp_to_box(p.u_nom0, plant);

  SfSolution sol;
  sol.max_violation = std::numeric_limits<double>::infinity();

  // Stage 0 does not depend on the decision variables.
  double stage0 = 0.0;
  for (std::size_t i = 0; i < p.model.constraints.size(); ++i) {
    stage0 = std::max(stage0, p.margins.at(i, 0) - p.model.constraints[i].eval(p.x0, p.k0));
  }

  std::vector<std::vector<Vec>> starts;
  auto add_start = [&](const std::vector<Vec>& s) {
    if (static_cast<int>(s.size()) != p.horizon) return;
    std::vector<Vec> c;
    for (const auto& u : s) c.push_back(clamp_to_box(u, plant));
    starts.push_back(std::move(c));
  };
  add_start(p.warm_start);
  add_start(p.nominal_plan);
  add_start(std::vector<Vec>(static_cast<std::size_t>(p.horizon), plant.box_center()));
  std::mt19937_64 rng(mix_seed(cfg.multistart_seed, static_cast<std::uint64_t>(p.k0)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 2; ++r) {
    std::vector<Vec> s;
    for (int l = 0; l < p.horizon; ++l) {
      Vec u(plant.n_inputs);
      for (int j = 0; j < plant.n_inputs; ++j) {
        u[j] = plant.input_lower[j] + unit(rng) * (plant.input_upper[j] - plant.input_lower[j]);
      }
      s.push_back(u);
    }
    add_start(s);
  }

  if (stage0 > cfg.tol_feas) {
    sol.controls = starts.front();
    sol.max_violation = stage0;
    sol.objective = (sol.controls[0] - u_nom0).norm();
    sol.solve_ms = elapsed_ms(t0);
    return sol;
  }

  // The nominal first input is optimal whenever some continuation keeps it feasible.
  for (std::size_t s = 0; s < starts.size(); ++s) {
    auto cand = starts[s];
    cand[0] = u_nom0;
    const Verified v = verify(p, cand, 0.0);
    if (v.ok) {
      sol.controls = std::move(cand);
      sol.objective = 0.0;
      sol.status = SfStatus::optimal;
      sol.max_violation = v.violation;
      sol.start_index = static_cast<int>(s);
      sol.solve_ms = elapsed_ms(t0);
      return sol;
    }
  }

  SfProblem local{p.model, p.margins, p.x0, p.k0, p.horizon, u_nom0, {}, {}};
  const double backoff = std::max(cfg.tol_feas, 1e-9);
  Shooting shooting(local, backoff);
  NlpProblem nlp;
  nlp.n_vars = shooting.n_vars();
  nlp.n_cons = shooting.n_cons();
  nlp.eval = [&](const Vec& z, Vec& c) { return shooting.eval(z, c); };
  nlp.weighted_gradient = [&](const Vec& z, const Vec& w) { return shooting.weighted_gradient(z, w); };
  NlpOptions opt;
  opt.tol_feas = backoff * 0.5;
  opt.tol_opt = cfg.tol_opt;
  opt.max_inner = cfg.max_iter;

  bool have_feasible = false;
  bool best_converged = false;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    NlpResult r;
    try {
      r = solve_nlp(nlp, shooting.encode(starts[s]), opt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numeric) throw;
      continue;
    }
    sol.iterations += r.iterations;
    auto u = shooting.decode(r.z);
    const Verified v = verify(local, u, cfg.tol_feas);
    if (!v.ok) {
      if (!have_feasible && v.violation < best_violation) {
        best_violation = v.violation;
        sol.controls = u;
        sol.max_violation = v.violation;
        sol.start_index = static_cast<int>(s);
      }
      continue;
    }
    const double obj = (u[0] - u_nom0).norm();
    // Keep the first start on ties; a converged run beats an unconverged one.
    if (!have_feasible || obj < sol.objective - 1e-12 || (r.converged && !best_converged && obj <= sol.objective + 1e-12)) {
      have_feasible = true;
      best_converged = r.converged;
      sol.controls = std::move(u);
      sol.objective = obj;
      sol.max_violation = v.violation;
      sol.start_index = static_cast<int>(s);
    }
    if (r.converged) break;
  }

  if (have_feasible) {
    sol.status = best_converged ? SfStatus::optimal : SfStatus::feasible_suboptimal;
  } else {
    sol.status = SfStatus::infeasible;
    if (sol.controls.empty()) sol.controls = starts.front();
    sol.objective = (sol.controls[0] - u_nom0).norm();
  }
  sol.solve_ms = elapsed_ms(t0);
  return sol;
}

SfSolution solve_sf_1step(const SafetyModel& model, double ld, const Vec& x0, long k0,
                          const Vec& u_nom0, const FilterConfig& cfg) {
  const SafetyModel barrier_only{model.plant, {}, model.barrier};
  const Margins margins = one_step_margins(model, ld, cfg.margin_mode);
  SfProblem p{barrier_only, margins, x0, k0, 1, u_nom0, {}, {u_nom0}};
  return solve_sf(p, cfg);
}

std::optional<std::vector<Vec>> shifted_candidate(const std::vector<Vec>& previous,
                                                  const SafetyModel& model, const Margins& margins,
                                                  const Vec& x_new, long k_new,
                                                  const FilterConfig& cfg) {
  if (previous.empty()) return std::nullopt;
  const PlantModel& plant = model.plant;
  const int n = static_cast<int>(previous.size());
  try {
    std::vector<Vec> head(previous.begin() + 1, previous.end());
    const auto states = predict(plant, x_new, head, k_new);
    const Vec& xl = states.back();
    const long kl = k_new + n - 1;
    const Vec lower = plant.input_lower;
    const Vec range = plant.input_upper - plant.input_lower;

    auto decode = [&](const Vec& z) { return Vec((lower + z.cwiseProduct(range)).cwiseMin(plant.input_upper)); };
    auto encode = [&](const Vec& u) {
      Vec z(u.size());
      for (long j = 0; j < u.size(); ++j) z[j] = range[j] > 0.0 ? (u[j] - lower[j]) / range[j] : 0.0;
      return Vec(z.cwiseMax(0.0).cwiseMin(1.0));
    };
    auto terminal_h = [&](const Vec& u) { return model.barrier.eval(plant.step(xl, u, kl), kl + 1); };
    BoxObjective neg_h = [&](const Vec& z, Vec& g) {
      const Vec u = decode(z);
      const Vec xn = plant.step(xl, u, kl);
      const StepJacobian jac = plant_jacobian(plant, xl, u, kl);
      g = -(jac.du.transpose() * gradient_of(model.barrier, xn, kl + 1)).cwiseProduct(range);
      return -model.barrier.eval(xn, kl + 1);
    };

    std::vector<Vec> seeds;
    if (plant.feasible_control) seeds.push_back(clamp_to_box(plant.feasible_control(xl, kl), plant));
    seeds.push_back(clamp_to_box(previous.back(), plant));
    seeds.push_back(plant.box_center());
    Vec best = seeds.front();
    double best_h = -std::numeric_limits<double>::infinity();
    for (const auto& s : seeds) {
      const double v = terminal_h(s);
      if (std::isfinite(v) && v > best_h) {
        best_h = v;
        best = s;
      }
    }
    const BoxResult opt = minimize_box(neg_h, encode(best), 1e-12, 100);
    const Vec u_opt = decode(opt.z);
    if (terminal_h(u_opt) > best_h) best = u_opt;

    head.push_back(best);
    const RolloutResult r = evaluate_controls(model, margins, x_new, k_new, head);
    if (r.terminal_slack >= 0.0 && max_violation(r) <= cfg.tol_feas) return head;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numeric) throw;
  }
  return std::nullopt;
}

}  // namespace safeguard
