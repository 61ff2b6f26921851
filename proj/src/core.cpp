#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace safeguard {

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

bool all_finite(const Vec& v) { return v.allFinite(); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool same(const std::vector<std::pair<long, Vec>>& a,
          const std::vector<std::pair<long, Vec>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || !same(a[i].second, b[i].second)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

void PlantModel::validate() const {
  require(n_states > 0, "plant '" + name + "': n_states must be positive");
  require(n_inputs > 0, "plant '" + name + "': n_inputs must be positive");
  require(input_lower.size() == n_inputs && input_upper.size() == n_inputs,
          "plant '" + name + "': input box has wrong dimension");
  require((input_lower.array() <= input_upper.array()).all(),
          "plant '" + name + "': input_lower must not exceed input_upper");
  require(input_lower.allFinite() && input_upper.allFinite(),
          "plant '" + name + "': input box must be finite");
  require(static_cast<bool>(step), "plant '" + name + "': missing step map");
  require(!std::isnan(lf_x) && lf_x >= 0.0, "plant '" + name + "': lf_x must be set and >= 0");
  if (lf_step) require(*lf_step > 0.0, "plant '" + name + "': lf_step must be > 0");
}

StepJacobian finite_difference_jacobian(const PlantModel& plant, const Vec& x, const Vec& u,
                                        long k) {
  const Vec f0 = plant.step(x, u, k);
  StepJacobian jac{Mat(plant.n_states, plant.n_states), Mat(plant.n_states, plant.n_inputs)};
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    jac.dx.col(i) = (plant.step(xp, u, k) - f0) / h;
    xp[i] = x[i];
  }
  Vec up = u;
  for (int j = 0; j < u.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
    up[j] = u[j] + h;
    jac.du.col(j) = (plant.step(x, up, k) - f0) / h;
    up[j] = u[j];
  }
  return jac;
}

StepJacobian plant_jacobian(const PlantModel& plant, const Vec& x, const Vec& u, long k) {
  if (plant.jacobian) return plant.jacobian(x, u, k);
  return finite_difference_jacobian(plant, x, u, k);
}

void BarrierFn::validate() const {
  require(static_cast<bool>(eval), "barrier: missing eval");
  require(lh_x >= 0.0, "barrier: lh_x must be >= 0");
  if (lh_k) require(*lh_k >= 0.0, "barrier: lh_k must be >= 0");
  if (boundary_layer_a) require(*boundary_layer_a > 0.0, "barrier: boundary_layer_a must be > 0");
}

Vec numeric_gradient(const ScalarFn& fn, const Vec& x, long k) {
  Vec g(x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = fn(xp, k);
    xp[i] = x[i] - h;
    const double fm = fn(xp, k);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec gradient_of(const ConstraintFn& c, const Vec& x, long k) {
  return c.gradient ? c.gradient(x, k) : numeric_gradient(c.eval, x, k);
}

Vec gradient_of(const BarrierFn& h, const Vec& x, long k) {
  return h.gradient ? h.gradient(x, k) : numeric_gradient(h.eval, x, k);
}

void SafetyModel::validate() const {
  plant.validate();
  barrier.validate();
  for (const auto& c : constraints) {
    require(static_cast<bool>(c.eval), "constraint '" + c.label + "': missing eval");
    require(c.lb_x >= 0.0, "constraint '" + c.label + "': lb_x must be >= 0");
  }
}

// ---------------------------------------------------------------------------

std::string to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::none: return "none";
    case DisturbanceKind::sinusoid: return "sinusoid";
    case DisturbanceKind::uniform_random: return "uniform_random";
    case DisturbanceKind::extreme_corner: return "extreme_corner";
    case DisturbanceKind::file: return "file";
    case DisturbanceKind::adversarial: return "adversarial";
  }
  return "none";
}

DisturbanceKind disturbance_kind_from_string(const std::string& s) {
  for (auto k : {DisturbanceKind::none, DisturbanceKind::sinusoid, DisturbanceKind::uniform_random,
                 DisturbanceKind::extreme_corner, DisturbanceKind::file,
                 DisturbanceKind::adversarial}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::config, "unknown disturbance kind '" + s + "'");
}

std::string to_string(NormConvention norm) {
  return norm == NormConvention::euclidean ? "euclidean" : "componentwise";
}

NormConvention norm_convention_from_string(const std::string& s) {
  if (s == "euclidean") return NormConvention::euclidean;
  if (s == "componentwise") return NormConvention::componentwise;
  fail(ErrorCode::config, "unknown norm convention '" + s + "'");
}

double vector_norm(const Vec& v, NormConvention norm) {
  if (v.size() == 0) return 0.0;
  return norm == NormConvention::euclidean ? v.norm() : v.cwiseAbs().maxCoeff();
}

Disturbance::Disturbance(DisturbanceSpec spec, int n_states) : spec_(std::move(spec)), n_(n_states) {
  require(n_ > 0, "disturbance: state dimension must be positive");
  require(spec_.ld >= 0.0 && std::isfinite(spec_.ld), "disturbance: ld must be finite and >= 0");
  for (int a : spec_.axes) require(a >= 0 && a < n_, "disturbance: axis index out of range");
  switch (spec_.kind) {
    case DisturbanceKind::sinusoid: {
      const int active = spec_.axes.empty() ? n_ : static_cast<int>(spec_.axes.size());
      const double worst = spec_.norm == NormConvention::euclidean
                               ? std::abs(spec_.amplitude) * std::sqrt(double(active))
                               : std::abs(spec_.amplitude);
      if (worst > spec_.ld) {
        fail(ErrorCode::invalid_argument,
             "disturbance: sinusoid amplitude exceeds the bound ld (peak norm " +
                 std::to_string(worst) + " > " + std::to_string(spec_.ld) + ")");
      }
      break;
    }
    case DisturbanceKind::extreme_corner:
    case DisturbanceKind::adversarial:
      require(spec_.signs.empty() || static_cast<int>(spec_.signs.size()) == n_,
              "disturbance: sign pattern must have one entry per state");
      for (int s : spec_.signs) require(s == 1 || s == -1, "disturbance: signs must be +1 or -1");
      require(spec_.random_fraction >= 0.0 && spec_.random_fraction <= 1.0,
              "disturbance: random_fraction must lie in [0, 1]");
      break;
    case DisturbanceKind::file: {
      table_ = read_keyed_csv(spec_.path, n_);
      for (const auto& [k, d] : table_) {
        if (vector_norm(d, spec_.norm) > spec_.ld) {
          fail(ErrorCode::invalid_argument, "disturbance file '" + spec_.path + "': row k=" +
                                                std::to_string(k) + " exceeds the bound ld");
        }
      }
      break;
    }
    default: break;
  }
}

Vec Disturbance::enforce_bound(Vec d, long k) const {
  double norm = vector_norm(d, spec_.norm);
  if (norm <= spec_.ld) return d;
  if (!std::isfinite(norm)) fail(ErrorCode::numeric, "disturbance: non-finite draw at k=" + std::to_string(k));
  // Rounding in a scaled corner can overshoot by an ulp; shrink until inside.
  double scale = spec_.ld / norm;
  while (vector_norm(d * scale, spec_.norm) > spec_.ld) scale = std::nextafter(scale, 0.0);
  return d * scale;
}

Vec Disturbance::uniform_in_ball(long k, std::uint64_t stream) const {
  std::mt19937_64 rng(mix_seed(mix_seed(spec_.seed, static_cast<std::uint64_t>(k)), stream));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec d(n_);
  if (spec_.ld == 0.0) return Vec::Zero(n_);
  for (;;) {
    for (int i = 0; i < n_; ++i) d[i] = unit(rng);
    if (spec_.norm == NormConvention::componentwise || d.squaredNorm() <= 1.0) break;
  }
  return enforce_bound(d * spec_.ld, k);
}

Vec Disturbance::corner(const std::vector<int>& signs) const {
  Vec d(n_);
  for (int i = 0; i < n_; ++i) d[i] = signs.empty() ? -1.0 : double(signs[i]);
  const double scale = spec_.norm == NormConvention::euclidean ? spec_.ld / std::sqrt(double(n_))
                                                                : spec_.ld;
  return enforce_bound(d * scale, 0);
}

Vec Disturbance::realize(const Vec& x, const Vec& u, long k, const DisturbanceScore& score) const {
  (void)x;
  (void)u;
  switch (spec_.kind) {
    case DisturbanceKind::none: return Vec::Zero(n_);
    case DisturbanceKind::sinusoid: {
      Vec d = Vec::Zero(n_);
      const double v = spec_.amplitude * std::sin(spec_.frequency * double(k));
      if (spec_.axes.empty()) {
        d.setConstant(v);
      } else {
        for (int a : spec_.axes) d[a] = v;
      }
      return enforce_bound(d, k);
    }
    case DisturbanceKind::uniform_random: return uniform_in_ball(k, 0);
    case DisturbanceKind::extreme_corner: return corner(spec_.signs);
    case DisturbanceKind::file: {
      auto it = std::find_if(table_.begin(), table_.end(),
                             [k](const auto& row) { return row.first == k; });
      if (it == table_.end()) {
        fail(ErrorCode::io, "disturbance file '" + spec_.path + "' has no row for k=" +
                                std::to_string(k));
      }
      return it->second;
    }
    case DisturbanceKind::adversarial: {
      if (spec_.random_fraction > 0.0) {
        std::mt19937_64 rng(mix_seed(mix_seed(spec_.seed, static_cast<std::uint64_t>(k)), 1));
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec_.random_fraction) {
          return uniform_in_ball(k, 2);
        }
      }
      if (!score) fail(ErrorCode::invalid_argument, "adversarial disturbance needs a score function");
      require(n_ < 20, "adversarial disturbance: too many corners to enumerate");
      Vec best;
      double best_score = std::numeric_limits<double>::infinity();
      std::vector<int> signs(n_);
      for (long pattern = 0; pattern < (1L << n_); ++pattern) {
        for (int i = 0; i < n_; ++i) signs[i] = (pattern >> i) & 1 ? 1 : -1;
        Vec d = corner(signs);
        const double s = score(d);
        if (s < best_score) {
          best_score = s;
          best = std::move(d);
        }
      }
      return best.size() == n_ ? best : corner({});
    }
  }
  return Vec::Zero(n_);
}

Vec realize_disturbance(const DisturbanceSpec& spec, const Vec& x, const Vec& u, long k,
                        const PlantModel& plant) {
  return Disturbance(spec, plant.n_states).realize(x, u, k);
}

// ---------------------------------------------------------------------------

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::zero: return "zero";
    case PolicyKind::proportional_tracker: return "proportional_tracker";
    case PolicyKind::schedule: return "schedule";
    case PolicyKind::file_lookup: return "file_lookup";
    case PolicyKind::callback: return "callback";
  }
  return "zero";
}

PolicyKind policy_kind_from_string(const std::string& s) {
  for (auto k : {PolicyKind::zero, PolicyKind::proportional_tracker, PolicyKind::schedule,
                 PolicyKind::file_lookup}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::config, "unknown nominal policy kind '" + s + "'");
}

namespace {

const Vec& lookup_piecewise(const std::vector<std::pair<long, Vec>>& table, long k) {
  // Entries are sorted by start step; before the first entry the first one holds.
  auto it = std::upper_bound(table.begin(), table.end(), k,
                             [](long key, const auto& row) { return key < row.first; });
  if (it == table.begin()) return table.front().second;
  return std::prev(it)->second;
}

}  // namespace

Vec ReferenceSchedule::at(long k) const {
  if (sinusoidal) {
    return offset.array() + amplitude * std::sin(omega * double(k + lead));
  }
  require(!steps.empty(), "reference schedule is empty");
  return lookup_piecewise(steps, k);
}

bool ReferenceSchedule::operator==(const ReferenceSchedule& o) const {
  return same(steps, o.steps) && sinusoidal == o.sinusoidal && same(offset, o.offset) &&
         amplitude == o.amplitude && omega == o.omega && lead == o.lead;
}

bool PolicySpec::operator==(const PolicySpec& o) const {
  return kind == o.kind && same(gain, o.gain) && same(offset, o.offset) &&
         reference == o.reference && same(table, o.table) && path == o.path;
}

NominalPolicy::NominalPolicy(PolicySpec spec, const PlantModel& plant)
    : spec_(std::move(spec)),
      lower_(plant.input_lower),
      upper_(plant.input_upper),
      m_(plant.n_inputs) {
  switch (spec_.kind) {
    case PolicyKind::proportional_tracker:
      require(spec_.gain.rows() == m_ && spec_.gain.cols() == plant.n_states,
              "proportional tracker: gain must be n_inputs x n_states");
      if (spec_.offset.size() == 0) spec_.offset = Vec::Zero(m_);
      require(spec_.offset.size() == m_, "proportional tracker: offset must have n_inputs entries");
      if (spec_.reference.sinusoidal) {
        require(spec_.reference.offset.size() == plant.n_states,
                "proportional tracker: reference offset must have n_states entries");
      } else {
        require(!spec_.reference.steps.empty(), "proportional tracker: empty reference schedule");
        for (const auto& [k, r] : spec_.reference.steps) {
          require(r.size() == plant.n_states, "proportional tracker: reference entry has wrong size");
        }
        std::stable_sort(spec_.reference.steps.begin(), spec_.reference.steps.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
      }
      break;
    case PolicyKind::schedule:
    case PolicyKind::file_lookup:
      if (spec_.kind == PolicyKind::file_lookup) spec_.table = read_keyed_csv(spec_.path, m_);
      require(!spec_.table.empty(), "nominal schedule is empty");
      for (const auto& [k, u] : spec_.table) {
        require(u.size() == m_, "nominal schedule entry has wrong size");
      }
      std::stable_sort(spec_.table.begin(), spec_.table.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      break;
    case PolicyKind::callback:
      fail(ErrorCode::invalid_argument, "callback policies are built with from_callback");
    case PolicyKind::zero: break;
  }
}

NominalPolicy NominalPolicy::from_callback(std::function<Vec(const Vec&, long)> fn,
                                           const PlantModel& plant) {
  require(static_cast<bool>(fn), "callback policy: empty function");
  NominalPolicy p;
  p.spec_.kind = PolicyKind::callback;
  p.lower_ = plant.input_lower;
  p.upper_ = plant.input_upper;
  p.m_ = plant.n_inputs;
  p.callback_ = std::move(fn);
  return p;
}

Vec NominalPolicy::raw(const Vec& x, long k) const {
  switch (spec_.kind) {
    case PolicyKind::zero: return Vec::Zero(m_);
    case PolicyKind::proportional_tracker:
      return spec_.offset + spec_.gain * (spec_.reference.at(k) - x);
    case PolicyKind::schedule:
    case PolicyKind::file_lookup: return lookup_piecewise(spec_.table, k);
    case PolicyKind::callback: return callback_(x, k);
  }
  return Vec::Zero(m_);
}

Vec NominalPolicy::operator()(const Vec& x, long k) const {
  Vec u = raw(x, k);
  if (u.size() != m_) fail(ErrorCode::invalid_argument, "nominal policy returned wrong size");
  if (!u.allFinite()) {
    fail(ErrorCode::numeric, "nominal policy returned a non-finite input at k=" + std::to_string(k));
  }
  return clamp_to_box(u, lower_, upper_);
}

// ---------------------------------------------------------------------------

std::string to_string(MarginMode mode) { return mode == MarginMode::robust ? "robust" : "nominal"; }

std::string to_string(TriggerMode mode) {
  return mode == TriggerMode::event_triggered ? "event_triggered" : "always_solve";
}

void FilterConfig::validate() const {
  require(horizon_n >= 1, "filter: horizon must be >= 1");
  require(tol_feas > 0.0 && tol_opt > 0.0, "filter: tolerances must be > 0");
  require(max_iter >= 1, "filter: max_iter must be >= 1");
}

Vec clamp_to_box(const Vec& u, const Vec& lower, const Vec& upper) {
  require(u.size() == lower.size() && u.size() == upper.size(), "clamp_to_box: dimension mismatch");
  if (!u.allFinite()) fail(ErrorCode::invalid_argument, "clamp_to_box: non-finite input");
  return u.cwiseMax(lower).cwiseMin(upper);
}

Vec clamp_to_box(const Vec& u, const PlantModel& plant) {
  return clamp_to_box(u, plant.input_lower, plant.input_upper);
}

std::vector<std::pair<long, Vec>> read_keyed_csv(const std::string& path, int expected_cols) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  std::vector<std::pair<long, Vec>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-')) {
      continue;  // header
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail(ErrorCode::io, path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (values.empty()) continue;
    const int cols = static_cast<int>(values.size()) - 1;
    if (expected_cols >= 0 && cols != expected_cols) {
      fail(ErrorCode::io, path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(expected_cols + 1) + " columns, got " +
                              std::to_string(cols + 1));
    }
    rows.emplace_back(static_cast<long>(values[0]),
                      Eigen::Map<Vec>(values.data() + 1, cols));
  }
  if (rows.empty()) fail(ErrorCode::io, "'" + path + "' contains no data rows");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return rows;
}

}  // namespace safeguard
