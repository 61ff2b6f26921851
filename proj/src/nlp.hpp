#pragma once

#include <functional>

#include "core.hpp"

namespace safeguard {

/// Objective for the box-constrained minimizer; writes the gradient into `grad`.
using BoxObjective = std::function<double(const Vec& z, Vec& grad)>;

struct BoxResult {
  Vec z;
  double value = 0.0;
  double pg_norm = 0.0;  // infinity norm of the projected gradient step
  int iterations = 0;
  bool converged = false;
};

/// Projected quasi-Newton on the unit box [0,1]^n: BFGS on the free variables,
/// gradient steps on the active ones, Armijo search along the projection arc.
BoxResult minimize_box(const BoxObjective& fn, Vec z0, double tol, int max_iter);

/// min f(z) s.t. c(z) >= 0, z in [0,1]^n.
struct NlpProblem {
  int n_vars = 0;
  int n_cons = 0;
  std::function<double(const Vec& z, Vec& c)> eval;  // returns f, fills c
  // Gradient of f(z) + sum_j w_j c_j(z).
  std::function<Vec(const Vec& z, const Vec& w)> weighted_gradient;
};

struct NlpOptions {
  double tol_feas = 1e-8;
  double tol_opt = 1e-8;
  int max_inner = 200;
  int max_outer = 30;
  int max_stall = 4;  // outer rounds without feasibility progress before giving up
};

struct NlpResult {
  Vec z;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Augmented Lagrangian with multiplier safeguarding and penalty growth when
/// the violation stalls.
NlpResult solve_nlp(const NlpProblem& problem, const Vec& z0, const NlpOptions& opt);

}  // namespace safeguard
