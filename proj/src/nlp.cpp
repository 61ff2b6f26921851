#include "nlp.hpp"

#include <algorithm>
#include <cmath>

namespace safeguard {

namespace {

Vec project(const Vec& z) { return z.cwiseMax(0.0).cwiseMin(1.0); }

double projected_gradient_norm(const Vec& z, const Vec& g) {
  return (project(z - g) - z).lpNorm<Eigen::Infinity>();
}

}  // namespace

BoxResult minimize_box(const BoxObjective& fn, Vec z0, double tol, int max_iter) {
  const long n = z0.size();
  BoxResult res;
  Vec z = project(z0);
  Vec g(n);
  double f = fn(z, g);
  if (!std::isfinite(f) || !g.allFinite()) fail(ErrorCode::numeric, "minimize_box: non-finite start");
  Mat H = Mat::Identity(n, n);
  bool scaled = false;
  Vec g_new(n);
  std::vector<char> active(static_cast<std::size_t>(n));

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const double pg = projected_gradient_norm(z, g);
    if (pg <= tol) {
      res.converged = true;
      break;
    }
    const double eps_act = std::min(1e-3, pg);
    for (long i = 0; i < n; ++i) {
      active[i] = (z[i] <= eps_act && g[i] > 0.0) || (z[i] >= 1.0 - eps_act && g[i] < 0.0);
    }
    Vec d(n);
    for (long i = 0; i < n; ++i) {
      if (active[i]) {
        d[i] = -g[i];
        continue;
      }
      double s = 0.0;
      for (long j = 0; j < n; ++j) {
        if (!active[j]) s += H(i, j) * g[j];
      }
      d[i] = -s;
    }

    bool accepted = false;
    Vec z_new;
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        // quasi-Newton direction failed: restart from steepest descent
        d = -g;
        H.setIdentity();
        scaled = false;
      }
      double alpha = std::min(1.0, 1.0 / std::max(1e-300, d.lpNorm<Eigen::Infinity>()));
      if (scaled) alpha = 1.0;
      for (int ls = 0; ls < 50; ++ls) {
        z_new = project(z + alpha * d);
        const Vec step = z_new - z;
        const double decrease = g.dot(step);
        if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
        if (decrease < 0.0) {
          f_new = fn(z_new, g_new);
          if (std::isfinite(f_new) && f_new <= f + 1e-4 * decrease) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
    }
    if (!accepted) break;

    const Vec s = z_new - z;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (!scaled) {
        H = Mat::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vec Hy = H * y;
      const double yHy = y.dot(Hy);
      H += ((1.0 + rho * yHy) * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    z = z_new;
    f = f_new;
    g = g_new;
  }
  res.z = z;
  res.value = f;
  res.pg_norm = projected_gradient_norm(z, g);
  if (res.pg_norm <= tol) res.converged = true;
  return res;
}

NlpResult solve_nlp(const NlpProblem& problem, const Vec& z0, const NlpOptions& opt) {
  require(z0.size() == problem.n_vars, "solve_nlp: start has wrong dimension");
  const int nc = problem.n_cons;
  Vec lambda = Vec::Zero(nc);
  double rho = 10.0;
  double prev_violation = std::numeric_limits<double>::infinity();
  double best_violation = prev_violation;
  int stalled = 0;
  Vec z = project(z0);
  Vec c(nc);
  NlpResult out;

  auto lagrangian = [&](const Vec& zz, Vec& grad) {
    Vec cc(nc);
    const double f = problem.eval(zz, cc);
    double pen = 0.0;
    Vec w(nc);
    for (int j = 0; j < nc; ++j) {
      const double t = std::max(0.0, lambda[j] - rho * cc[j]);
      pen += t * t - lambda[j] * lambda[j];
      w[j] = -t;
    }
    grad = problem.weighted_gradient(zz, w);
    return f + pen / (2.0 * rho);
  };

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const double inner_tol = std::max(opt.tol_opt, 1e-3 * std::pow(0.1, outer));
    const BoxResult inner = minimize_box(lagrangian, z, inner_tol, opt.max_inner);
    z = inner.z;
    out.iterations += inner.iterations;
    out.stationarity = inner.pg_norm;
    out.objective = problem.eval(z, c);
    double violation = 0.0;
    double complementarity = 0.0;
    for (int j = 0; j < nc; ++j) {
      violation = std::max(violation, -c[j]);
      complementarity = std::max(complementarity, std::abs(std::min(c[j], lambda[j] / rho)));
    }
    out.max_violation = violation;
    if (violation <= opt.tol_feas && inner.pg_norm <= opt.tol_opt &&
        complementarity <= std::max(opt.tol_feas, 1e-6)) {
      out.converged = true;
      break;
    }
    if (violation <= opt.tol_feas && inner_tol <= opt.tol_opt && !inner.converged) {
      // feasible but the inner solver cannot tighten further
      break;
    }
    // no progress on feasibility under a growing penalty: likely infeasible
    stalled = violation > 0.99 * best_violation ? stalled + 1 : 0;
    best_violation = std::min(best_violation, violation);
    if (stalled >= opt.max_stall) break;
    for (int j = 0; j < nc; ++j) lambda[j] = std::max(0.0, lambda[j] - rho * c[j]);
    if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, 1e10);
    prev_violation = violation;
  }
  out.z = z;
  return out;
}

}  // namespace safeguard
