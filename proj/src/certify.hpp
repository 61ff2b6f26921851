#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core.hpp"
#include "margins.hpp"

namespace safeguard {

struct CertFailure {
  Vec x;
  long k = 0;
  double slack = 0.0;
  long grid_index = 0;
};

struct CertReport {
  Vec lower;
  Vec upper;
  long grid_points = 0;  // states x time samples
  long points_in_C = 0;
  long feasible_count = 0;
  double threshold = 0.0;  // lh_x * ld * lf_x^(N-1)
  double tolerance = 0.0;
  double min_slack = std::numeric_limits<double>::infinity();
  double max_abs_input = 0.0;
  std::vector<CertFailure> failures;  // sorted by (k, grid index)

  bool pass() const { return failures.empty() && points_in_C > 0; }
  std::string verdict() const { return pass() ? "pass (sampled)" : "fail"; }
  std::string to_json() const;
};

/// Checks h(f(x, u(x,k), k), k+1) >= lh_x * ld * lf_x^(N-1) at every grid state
/// inside C(k) for each sampled k. A slack below -tolerance is a failure.
CertReport certify_grid(const SafetyModel& model, const ControlMap& candidate, int horizon, double ld,
                        const GridBox& grid, const std::vector<long>& ks, double tolerance = 1e-12);

using StateMap = std::function<Vec(const Vec& x, long k)>;

/// Largest sampled difference quotient |g(x)-g(y)| / |x-y|: a lower estimate
/// of the Lipschitz constant, for diagnostics only.
double estimate_lipschitz(const StateMap& g, const Vec& lower, const Vec& upper,
                          const std::vector<long>& ks, long samples, std::uint64_t seed);

}  // namespace safeguard
