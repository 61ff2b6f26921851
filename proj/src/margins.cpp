#include "margins.hpp"

#include <cmath>

#include "json.hpp"

namespace safeguard {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    fail(ErrorCode::invalid_argument, std::string(name) + " must be finite and >= 0");
  }
}

}  // namespace

double stage_margin(double lb_x, double ld, double lf_x, int l) {
  require_nonnegative(lb_x, "lb_x");
  require_nonnegative(ld, "ld");
  require_nonnegative(lf_x, "lf_x");
  require(l >= 0, "stage index must be >= 0");
  if (l == 0) return 0.0;
  double sum = 0.0;
  if (std::abs(lf_x - 1.0) < 1e-9) {
    double p = 1.0;
    for (int j = 0; j < l; ++j) {
      sum += p;
      p *= lf_x;
    }
  } else {
    sum = (std::pow(lf_x, l) - 1.0) / (lf_x - 1.0);
  }
  return lb_x * ld * sum;
}

double terminal_margin(double lh_x, double ld, double lf_x, int n) {
  require_nonnegative(lh_x, "lh_x");
  require_nonnegative(ld, "ld");
  require_nonnegative(lf_x, "lf_x");
  require(n >= 1, "horizon must be >= 1");
  return lh_x * ld * std::pow(lf_x, n - 1);
}

double compute_boundary_layer(double lh_x, double lf_step, double ld, double lh_k) {
  require_nonnegative(lh_x, "lh_x");
  require_nonnegative(lf_step, "lf_step");
  require_nonnegative(ld, "ld");
  require_nonnegative(lh_k, "lh_k");
  return lh_x * (lf_step + ld) + lh_k;
}

Margins build_margins(const SafetyModel& model, double ld, const FilterConfig& cfg) {
  cfg.validate();
  if (std::isnan(model.plant.lf_x)) fail(ErrorCode::config, "plant has no lf_x; cannot build margins");
  const int n = cfg.horizon_n;
  Margins m;
  m.horizon = n;
  const bool off = cfg.margin_mode == MarginMode::nominal;
  for (const auto& c : model.constraints) {
    std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
    if (!off) {
      for (int l = 0; l <= n; ++l) row[l] = stage_margin(c.lb_x, ld, model.plant.lf_x, l);
    }
    m.stage.push_back(std::move(row));
  }
  m.terminal = off ? 0.0 : terminal_margin(model.barrier.lh_x, ld, model.plant.lf_x, n);
  return m;
}

Margins one_step_margins(const SafetyModel& model, double ld, MarginMode mode) {
  Margins m;
  m.horizon = 1;
  m.terminal = mode == MarginMode::nominal ? 0.0 : model.barrier.lh_x * ld;
  return m;
}

long GridBox::size() const {
  require(lower.size() == upper.size() && lower.size() == static_cast<long>(resolution.size()),
          "grid: dimension mismatch");
  require(lower.size() > 0, "grid: empty domain");
  long total = 1;
  for (int r : resolution) {
    require(r >= 2, "grid: resolution must be >= 2 per axis");
    total *= r;
  }
  return total;
}

Vec GridBox::point(long index) const {
  Vec x(lower.size());
  for (long d = 0; d < lower.size(); ++d) {
    const long r = resolution[d];
    const long i = index % r;
    index /= r;
    x[d] = lower[d] + (upper[d] - lower[d]) * double(i) / double(r - 1);
  }
  return x;
}

bool SetCheckReport::all_nonempty() const {
  for (const auto& s : sets) {
    if (s.members == 0) return false;
  }
  return true;
}

std::string SetCheckReport::to_json() const {
  nlohmann::json j;
  j["terminal_margin"] = terminal;
  j["stage_margin_N"] = stage_n;
  j["grid_points"] = grid_points;
  j["inclusion_checked"] = inclusion_checked;
  j["inclusion_failure_count"] = inclusion_failure_count;
  j["all_nonempty"] = all_nonempty();
  j["pass"] = pass();
  auto& sets_j = j["sets"] = nlohmann::json::array();
  for (const auto& s : sets) {
    sets_j.push_back({{"set", s.set}, {"l", s.l}, {"constraint", s.constraint}, {"k", s.k},
                      {"members", s.members}, {"margin", s.margin}, {"pass", s.members > 0}});
  }
  auto& fail_j = j["inclusion_failures"] = nlohmann::json::array();
  for (const auto& f : inclusion_failures) {
    fail_j.push_back({{"set", "X_f^N in X^N"},
                      {"k", f.k},
                      {"point", std::vector<double>(f.point.data(), f.point.data() + f.point.size())},
                      {"constraint", f.constraint},
                      {"value", f.value},
                      {"margin", f.margin},
                      {"pass", false}});
  }
  return j.dump(2);
}

SetCheckReport check_tightened_sets(const SafetyModel& model, const Margins& margins,
                                    const GridBox& grid, const std::vector<long>& ks) {
  const long total = grid.size();
  require(!ks.empty(), "assumption check: empty time window");
  require(grid.lower.size() == model.plant.n_states, "assumption check: grid has wrong dimension");
  const int n = margins.horizon;
  const std::size_t nc = model.constraints.size();

  SetCheckReport rep;
  rep.terminal = margins.terminal;
  for (std::size_t i = 0; i < nc; ++i) rep.stage_n.push_back(margins.at(i, n));
  rep.grid_points = total;

  for (long k : ks) {
    // members[i][l] counts grid points with b_i(x, k+l) >= stage margin l.
    std::vector<std::vector<long>> members(nc, std::vector<long>(static_cast<std::size_t>(n) + 1, 0));
    long terminal_members = 0;
    for (long p = 0; p < total; ++p) {
      const Vec x = grid.point(p);
      for (std::size_t i = 0; i < nc; ++i) {
        for (int l = 0; l <= n; ++l) {
          if (model.constraints[i].eval(x, k + l) >= margins.at(i, l)) ++members[i][l];
        }
      }
      if (model.barrier.eval(x, k + n) >= margins.terminal) {
        ++terminal_members;
        ++rep.inclusion_checked;
        for (std::size_t i = 0; i < nc; ++i) {
          const double v = model.constraints[i].eval(x, k + n);
          if (v < margins.at(i, n) && ++rep.inclusion_failure_count <= 50) {
            rep.inclusion_failures.push_back({k, x, model.constraints[i].label, v, margins.at(i, n)});
          }
        }
      }
    }
    for (std::size_t i = 0; i < nc; ++i) {
      for (int l = 0; l <= n; ++l) {
        rep.sets.push_back({"X^l", l, static_cast<int>(i), k + l, members[i][l], margins.at(i, l)});
      }
    }
    rep.sets.push_back({"X_f^N", n, -1, k + n, terminal_members, margins.terminal});
  }
  return rep;
}

}  // namespace safeguard
