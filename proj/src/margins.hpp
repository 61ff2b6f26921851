#pragma once

#include <string>
#include <vector>

#include "core.hpp"

namespace safeguard {

double stage_margin(double lb_x, double ld, double lf_x, int l);
double terminal_margin(double lh_x, double ld, double lf_x, int n);

/// Smallest boundary-layer width a for the 1-step filter: lh_x (lf_step + ld) + lh_k.
double compute_boundary_layer(double lh_x, double lf_step, double ld, double lh_k);

/// Tightening for a horizon N. stage[i][l] is the margin on constraint i at
/// prediction step l (l = 0..N); terminal applies to h at step N.
struct Margins {
  int horizon = 1;
  std::vector<std::vector<double>> stage;
  double terminal = 0.0;

  double at(std::size_t i, int l) const { return stage[i][static_cast<std::size_t>(l)]; }
};

Margins build_margins(const SafetyModel& model, double ld, const FilterConfig& cfg);

/// Margins of the 1-step filter: terminal lh_x * ld, no stage constraints.
Margins one_step_margins(const SafetyModel& model, double ld, MarginMode mode);

struct GridBox {
  Vec lower;
  Vec upper;
  std::vector<int> resolution;  // points per axis, each >= 2

  long size() const;
  Vec point(long index) const;
};

struct SetCheck {
  std::string set;  // "X^l" or "X_f^N"
  int l = 0;
  int constraint = -1;  // -1 for the barrier set
  long k = 0;
  long members = 0;
  double margin = 0.0;
};

struct InclusionFailure {
  long k = 0;
  Vec point;
  std::string constraint;
  double value = 0.0;
  double margin = 0.0;
};

struct SetCheckReport {
  double terminal = 0.0;
  std::vector<double> stage_n;  // per constraint, margin at l = N
  long grid_points = 0;
  std::vector<SetCheck> sets;
  std::vector<InclusionFailure> inclusion_failures;  // first few only
  long inclusion_failure_count = 0;
  long inclusion_checked = 0;

  bool all_nonempty() const;
  bool pass() const { return all_nonempty() && inclusion_failure_count == 0; }
  std::string to_json() const;
};

/// Grid check that the tightened sets are nonempty and that the terminal set
/// sits inside the last tightened constraint set, for each k in `ks`.
SetCheckReport check_tightened_sets(const SafetyModel& model, const Margins& margins,
                                    const GridBox& grid, const std::vector<long>& ks);

}  // namespace safeguard
