#include "certify.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <algorithm>

#include "json.hpp"

namespace safeguard {

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string CertReport::to_json() const {
  nlohmann::json j;
  j["domain_box"] = {{"lower", to_std(lower)}, {"upper", to_std(upper)}};
  j["grid_points"] = grid_points;
  j["points_in_C"] = points_in_C;
  j["feasible_count"] = feasible_count;
  j["threshold"] = threshold;
  j["tolerance"] = tolerance;
  j["min_slack"] = points_in_C > 0 ? nlohmann::json(min_slack) : nlohmann::json(nullptr);
  j["max_abs_input"] = max_abs_input;
  j["failure_count"] = failures.size();
  auto& f = j["failures"] = nlohmann::json::array();
  for (const auto& e : failures) f.push_back({{"x", to_std(e.x)}, {"k", e.k}, {"slack", e.slack}});
  j["verdict"] = verdict();
  return j.dump(2);
}

CertReport certify_grid(const SafetyModel& model, const ControlMap& candidate, int horizon, double ld,
                        const GridBox& grid, const std::vector<long>& ks, double tolerance) {
  require(static_cast<bool>(candidate), "certify: no candidate control");
  require(!ks.empty(), "certify: no time samples");
  require(tolerance >= 0.0, "certify: tolerance must be >= 0");
  const long total = grid.size();
  require(grid.lower.size() == model.plant.n_states, "certify: grid has wrong dimension");
  const PlantModel& plant = model.plant;

  CertReport rep;
  rep.lower = grid.lower;
  rep.upper = grid.upper;
  rep.tolerance = tolerance;
  rep.threshold = terminal_margin(model.barrier.lh_x, ld, plant.lf_x, horizon);
  rep.grid_points = total * static_cast<long>(ks.size());

  for (long k : ks) {
    for (long p = 0; p < total; ++p) {
      const Vec x = grid.point(p);
      if (model.barrier.eval(x, k) < 0.0) continue;
      ++rep.points_in_C;
      const Vec u = candidate(x, k);
      const bool inside = u.size() == plant.n_inputs && u.allFinite() &&
                          (u.array() >= plant.input_lower.array()).all() &&
                          (u.array() <= plant.input_upper.array()).all();
      if (!inside) {
        std::ostringstream msg;
        msg << "certify: candidate output outside the input box at x=[" << x.transpose() << "], k=" << k;
        fail(ErrorCode::invalid_argument, msg.str());
      }
      rep.max_abs_input = std::max(rep.max_abs_input, u.cwiseAbs().maxCoeff());
      const double slack = model.barrier.eval(plant.step(x, u, k), k + 1) - rep.threshold;
      rep.min_slack = std::min(rep.min_slack, slack);
      if (slack >= -tolerance) {
        ++rep.feasible_count;
      } else {
        rep.failures.push_back({x, k, slack, p});
      }
    }
  }
  return rep;
}

double estimate_lipschitz(const StateMap& g, const Vec& lower, const Vec& upper,
                          const std::vector<long>& ks, long samples, std::uint64_t seed) {
  require(samples >= 2, "estimate_lipschitz: need at least 2 samples");
  require(lower.size() == upper.size() && lower.size() > 0, "estimate_lipschitz: bad domain");
  require((upper.array() > lower.array()).all(), "estimate_lipschitz: degenerate domain");
  require(!ks.empty(), "estimate_lipschitz: empty time window");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec span = upper - lower;
  auto draw = [&] {
    Vec x(lower.size());
    for (long i = 0; i < x.size(); ++i) x[i] = lower[i] + unit(rng) * span[i];
    return x;
  };
  double best = 0.0;
  for (long s = 0; s < samples; ++s) {
    const long k = ks[static_cast<std::size_t>(s) % ks.size()];
    const Vec x = draw();
    Vec y;
    if (s % 2 == 0) {
      y = draw();
    } else {
      // nearby pair: local slopes dominate the supremum
      y = x;
      for (long i = 0; i < y.size(); ++i) {
        y[i] = std::clamp(x[i] + 1e-3 * span[i] * (2.0 * unit(rng) - 1.0), lower[i], upper[i]);
      }
    }
    const double dx = (x - y).norm();
    if (dx == 0.0) continue;
    best = std::max(best, (g(x, k) - g(y, k)).norm() / dx);
  }
  return best;
}

}  // namespace safeguard
