#include "plants.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <unordered_map>

namespace safeguard {

// ---------------------------------------------------------------------------
// Parameter plumbing

ParamReader::ParamReader(std::string section, const std::map<std::string, std::string>& values)
    : section_(std::move(section)), values_(values) {}

double parse_number(const std::string& section, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::config, section + "." + key + ": expected a number, got '" + text + "'");
  }
}

double ParamReader::number(const std::string& key, double fallback) {
  return optional_number(key).value_or(fallback);
}

std::optional<double> ParamReader::optional_number(const std::string& key) {
  used_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return parse_number(section_, key, it->second);
}

long ParamReader::integer(const std::string& key, long fallback) {
  const double v = number(key, double(fallback));
  if (v != std::floor(v)) fail(ErrorCode::config, section_ + "." + key + ": expected an integer");
  return static_cast<long>(v);
}

std::string ParamReader::text(const std::string& key, const std::string& fallback) {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

void ParamReader::finish() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) fail(ErrorCode::config, "unknown key '" + section_ + "." + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Polynomial fit

double PolyFit::operator()(double x) const {
  const double t = (x - center) / radius;
  double v = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * t + *it;
  return v;
}

double PolyFit::derivative(double x) const {
  const double t = (x - center) / radius;
  double v = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 1;) v = v * t + double(i) * coeffs[i];
  return v / radius;
}

PolyFit fit_polynomial(const std::function<double(double)>& target, int degree, double lo, double hi,
                       int samples) {
  require(degree >= 0, "fit: degree must be >= 0");
  require(hi > lo, "fit: empty interval");
  require(samples >= degree + 1 && samples >= 2, "fit: need at least degree + 1 samples");
  PolyFit fit;
  fit.center = 0.5 * (lo + hi);
  fit.radius = 0.5 * (hi - lo);
  Mat V(samples, degree + 1);
  Vec y(samples);
  for (int s = 0; s < samples; ++s) {
    const double x = lo + (hi - lo) * double(s) / double(samples - 1);
    const double t = (x - fit.center) / fit.radius;
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      V(s, d) = p;
      p *= t;
    }
    y[s] = target(x);
  }
  Eigen::ColPivHouseholderQR<Mat> qr(V);
  const Vec diag = qr.matrixR().diagonal().cwiseAbs();
  if (qr.rank() < degree + 1 || diag.minCoeff() <= 1e-12 * diag.maxCoeff()) {
    fail(ErrorCode::numeric, "fit: least-squares system is ill-conditioned");
  }
  const Vec c = qr.solve(y);
  fit.coeffs.assign(c.data(), c.data() + c.size());
  const int check = std::max(20001, 10 * samples);
  for (int s = 0; s < check; ++s) {
    const double x = lo + (hi - lo) * double(s) / double(check - 1);
    fit.max_residual = std::max(fit.max_residual, std::abs(fit(x) - target(x)));
  }
  return fit;
}

PolyFit fit_psi(int degree, double lo, double hi, int samples) {
  return fit_polynomial([](double x) { return std::sqrt(x); }, degree, lo, hi, samples);
}

namespace {

double lip_or(const std::optional<double>& v, double fallback) { return v.value_or(fallback); }

ConstraintFn linear_constraint(std::string label, Vec normal, double offset, double lb) {
  // b(x) = normal . x + offset
  ConstraintFn c;
  c.label = std::move(label);
  c.lb_x = lb;
  c.eval = [normal, offset](const Vec& x, long) { return normal.dot(x) + offset; };
  c.gradient = [normal](const Vec&, long) { return normal; };
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Two tanks

Vec two_tank_inflow_match(double y1, double y2, const TwoTankParams& p) {
  auto cost = [&](double u1, double u2) {
    const double e1 = p.c1 * (1.0 - u2) * u1 - y1;
    const double e2 = p.c1 * u1 * u2 - y2;
    return e1 * e1 + p.rho * e2 * e2;
  };
  const double top = p.u_max;
  double b1 = 0.0, b2 = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double v = cost(top * i / 100.0, top * j / 100.0);
      if (v < best) {
        best = v;
        b1 = top * i / 100.0;
        b2 = top * j / 100.0;
      }
    }
  }
  // compass search from the best grid node
  double step = 0.005 * top;
  while (step > 1e-12) {
    bool moved = false;
    const double cand[4][2] = {{step, 0}, {-step, 0}, {0, step}, {0, -step}};
    for (const auto& d : cand) {
      const double u1 = std::clamp(b1 + d[0], 0.0, top);
      const double u2 = std::clamp(b2 + d[1], 0.0, top);
      const double v = cost(u1, u2);
      if (v < best) {
        best = v;
        b1 = u1;
        b2 = u2;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  return Vec{{b1, b2}};
}

namespace {

Vec two_tank_model_step(const Vec& x, const Vec& u, const TwoTankParams& p, const PolyFit& psi) {
  const double q1 = psi(x[0]);
  const double q2 = psi(x[1]);
  return Vec{{x[0] + p.dt * (-p.c2 * q1 + p.c1 * (1.0 - u[1]) * u[0]),
              x[1] + p.dt * (p.c2 * q1 - p.c2 * q2 + p.c1 * u[0] * u[1])}};
}

double two_tank_h(const Vec& x, const TwoTankParams& p) {
  const double e1 = x[0] - p.xr1;
  const double e2 = x[1] - p.xr2;
  return p.eps - e1 * e1 - p.rho * e2 * e2;
}

}  // namespace

Vec two_tank_candidate(const Vec& x, const TwoTankParams& p, const PolyFit& psi, double threshold) {
  const Vec zero = Vec::Zero(2);
  if (two_tank_h(two_tank_model_step(x, zero, p, psi), p) >= threshold) return zero;
  const double y1 = -(x[0] - p.xr1) / p.dt + p.c2 * psi(x[0]);
  const double y2 = -(x[1] - p.xr2) / p.dt - p.c2 * psi(x[0]) + p.c2 * psi(x[1]);
  return two_tank_inflow_match(y1, y2, p);
}

PlantBundle make_two_tank(const TwoTankParams& p, const LipschitzOverrides& lip, int horizon) {
  require(p.dt > 0 && p.c1 > 0 && p.c2 > 0, "two_tank: c1, c2, dt must be positive");
  require(p.x_min > 0 && p.x_max > p.x_min, "two_tank: need 0 < x_min < x_max");
  require(p.eps > 0 && p.rho > 0, "two_tank: eps and rho must be positive");
  require(p.w_bar >= 0, "two_tank: w_bar must be >= 0");
  require(p.u_max > 0, "two_tank: u_max must be positive");
  const auto psi = std::make_shared<const PolyFit>(fit_psi(p.psi_degree, p.x_min, p.x_max, p.psi_samples));

  PlantBundle b;
  // |f_bar - f| <= dt c2 |(e1, e1 - e2)| <= dt c2 sqrt(5) * residual
  b.model_error = p.dt * p.c2 * std::sqrt(5.0) * psi->max_residual;
  const double composite = std::sqrt(2.0) * (psi->max_residual + p.w_bar);
  b.ld = lip_or(lip.ld, composite);
  b.info["psi_max_residual"] = psi->max_residual;
  b.info["psi_at_0.64"] = (*psi)(0.64);
  b.info["composite_ld"] = composite;
  b.info["model_error"] = b.model_error;

  PlantModel& plant = b.model.plant;
  plant.name = "two_tank";
  plant.n_states = 2;
  plant.n_inputs = 2;
  plant.input_lower = Vec::Zero(2);
  plant.input_upper = Vec::Constant(2, p.u_max);
  plant.lf_x = lip_or(lip.lf_x, 1.205);
  if (lip.lf_step) plant.lf_step = lip.lf_step;
  plant.step = [p, psi](const Vec& x, const Vec& u, long) { return two_tank_model_step(x, u, p, *psi); };
  plant.jacobian = [p, psi](const Vec& x, const Vec& u, long) {
    StepJacobian j{Mat::Zero(2, 2), Mat::Zero(2, 2)};
    const double d1 = psi->derivative(x[0]);
    const double d2 = psi->derivative(x[1]);
    j.dx << 1.0 - p.dt * p.c2 * d1, 0.0, p.dt * p.c2 * d1, 1.0 - p.dt * p.c2 * d2;
    j.du << p.dt * p.c1 * (1.0 - u[1]), -p.dt * p.c1 * u[0], p.dt * p.c1 * u[1], p.dt * p.c1 * u[0];
    return j;
  };
  plant.truth_step = [p](const Vec& x, const Vec& u, long) {
    const double q1 = std::sqrt(std::max(x[0], 0.0));
    const double q2 = std::sqrt(std::max(x[1], 0.0));
    return Vec{{x[0] + p.dt * (-p.c2 * q1 + p.c1 * (1.0 - u[1]) * u[0]),
                x[1] + p.dt * (p.c2 * q1 - p.c2 * q2 + p.c1 * u[0] * u[1])}};
  };

  const double lb = lip_or(lip.lb_x, 1.0);
  b.model.constraints = {
      linear_constraint("x1_min", Vec{{1.0, 0.0}}, -p.x_min, lb),
      linear_constraint("x1_max", Vec{{-1.0, 0.0}}, p.x_max, lb),
      linear_constraint("x2_min", Vec{{0.0, 1.0}}, -p.x_min, lb),
      linear_constraint("x2_max", Vec{{0.0, -1.0}}, p.x_max, lb),
  };
  BarrierFn& h = b.model.barrier;
  h.lh_x = lip_or(lip.lh_x, 1.331);
  h.lh_k = lip.lh_k;
  h.boundary_layer_a = lip.boundary_layer;
  h.eval = [p](const Vec& x, long) { return two_tank_h(x, p); };
  h.gradient = [p](const Vec& x, long) {
    return Vec{{-2.0 * (x[0] - p.xr1), -2.0 * p.rho * (x[1] - p.xr2)}};
  };

  const double threshold = terminal_margin(h.lh_x, b.ld, plant.lf_x, horizon);
  b.candidate = [p, psi, threshold](const Vec& x, long) { return two_tank_candidate(x, p, *psi, threshold); };
  plant.feasible_control = b.candidate;
  b.cert_grid = GridBox{Vec{{0.284, 0.284}}, Vec{{0.976, 0.976}}, {100, 100}};
  b.cert_ks = {0};
  return b;
}

// ---------------------------------------------------------------------------
// Building zone

BuildingParams::BuildingParams() {
  A.resize(4, 4);
  A << 0.995, 0.0017, 0.0, 0.0031,
       0.0007, 0.996, 0.0003, 0.0031,
       0.0, 0.0003, 0.983, 0.0,
       0.202, 0.488, 0.01, 0.257;
  B = Vec{{1.76e-6, 1.76e-6, 0.0, 0.000506}};
}

namespace {

bool is_day(long k, long period, long start, long end) {
  const long phase = ((k % period) + period) % period;
  return phase >= start && phase < end;
}

}  // namespace

double BuildingParams::upper(long k) const {
  return is_day(k, period, day_start, day_end) ? day_high : night_high;
}

double BuildingParams::lower(long k) const {
  return is_day(k, period, day_start, day_end) ? day_low : night_low;
}

PlantBundle make_building(const BuildingParams& p, const LipschitzOverrides& lip, int horizon) {
  (void)horizon;
  require(p.A.rows() == 4 && p.A.cols() == 4 && p.B.size() == 4, "building: A must be 4x4, B length 4");
  require(p.u_max > 0, "building: u_max must be positive");
  require(p.night_low < p.night_high && p.day_low < p.day_high,
          "building: comfort lower bound must be below the upper bound");
  require(p.period > 0 && p.day_start >= 0 && p.day_end <= p.period && p.day_start <= p.day_end,
          "building: day window must lie inside the period");
  require(p.eps > 0, "building: eps must be positive");

  // Estimated disturbance: CSV series, or a synthetic series that holds the
  // all-20 state at u_eq plus a daily swing on the zone temperature.
  std::function<Vec(long)> w_hat;
  if (!p.w_hat_path.empty()) {
    auto table = std::make_shared<std::unordered_map<long, Vec>>();
    for (auto& [k, w] : read_keyed_csv(p.w_hat_path, 4)) (*table)[k] = w;
    const std::string path = p.w_hat_path;
    w_hat = [table, path](long k) -> Vec {
      auto it = table->find(k);
      if (it == table->end()) {
        fail(ErrorCode::io, "w_hat series '" + path + "' exhausted at k=" + std::to_string(k));
      }
      return it->second;
    };
  } else {
    const Vec base = (Mat::Identity(4, 4) - p.A) * Vec::Constant(4, 20.0) - p.B * p.u_eq;
    const double amp = p.w_hat_amplitude;
    const double omega = 2.0 * M_PI / double(p.period);
    w_hat = [base, amp, omega](long k) {
      Vec w = base;
      w[3] += amp * std::sin(omega * double(k));
      return w;
    };
  }

  PlantBundle b;
  b.ld = lip_or(lip.ld, 0.005);
  PlantModel& plant = b.model.plant;
  plant.name = "building";
  plant.n_states = 4;
  plant.n_inputs = 1;
  plant.input_lower = Vec::Zero(1);
  plant.input_upper = Vec::Constant(1, p.u_max);
  plant.lf_x = lip_or(lip.lf_x, 0.9998);
  if (lip.lf_step) plant.lf_step = lip.lf_step;
  const Mat A = p.A;
  const Vec B = p.B;
  plant.step = [A, B, w_hat](const Vec& x, const Vec& u, long k) { return Vec(A * x + B * u[0] + w_hat(k)); };
  plant.jacobian = [A, B](const Vec&, const Vec&, long) { return StepJacobian{A, Mat(B)}; };
  plant.feasible_control = [A, B, w_hat, p](const Vec& x, long k) {
    const double free = (A * x + w_hat(k))[3];
    return Vec::Constant(1, std::clamp((p.y_ref - free) / B[3], 0.0, p.u_max));
  };
  b.candidate = plant.feasible_control;

  const double lb = lip_or(lip.lb_x, 1.0);
  ConstraintFn hi;
  hi.label = "comfort_upper";
  hi.lb_x = lb;
  hi.eval = [p](const Vec& x, long k) { return p.upper(k) - x[3]; };
  hi.gradient = [](const Vec&, long) { return Vec{{0.0, 0.0, 0.0, -1.0}}; };
  ConstraintFn lo;
  lo.label = "comfort_lower";
  lo.lb_x = lb;
  lo.eval = [p](const Vec& x, long k) { return x[3] - p.lower(k); };
  lo.gradient = [](const Vec&, long) { return Vec{{0.0, 0.0, 0.0, 1.0}}; };
  b.model.constraints = {hi, lo};

  BarrierFn& h = b.model.barrier;
  h.lh_x = lip_or(lip.lh_x, 100.0);
  h.lh_k = lip.lh_k;
  h.boundary_layer_a = lip.boundary_layer;
  h.eval = [p](const Vec& x, long) {
    const double e = x[3] - p.y_ref;
    return p.eps - e * e;
  };
  h.gradient = [p](const Vec& x, long) { return Vec{{0.0, 0.0, 0.0, -2.0 * (x[3] - p.y_ref)}}; };

  b.cert_grid = GridBox{Vec::Constant(4, 19.0), Vec::Constant(4, 21.0), {6, 6, 6, 6}};
  b.cert_ks = {0, p.period / 4, p.period / 2, 3 * p.period / 4};
  return b;
}

// ---------------------------------------------------------------------------
// Single integrator

double integrator_candidate(double x, long k, double eps, double lh_x, double ld, double dt,
                            const std::function<double(long)>& reference) {
  const double c = lh_x * ld;
  if (!(eps > c)) fail(ErrorCode::invalid_argument, "integrator candidate: eps must exceed lh_x * ld");
  const double r = reference(k + 1);
  if (eps - (x - r) * (x - r) >= c) return 0.0;
  const double y = (r - x) / dt;
  return y - std::copysign(std::sqrt(eps - c), y) / dt;
}

PlantBundle make_integrator(const IntegratorParams& p, const LipschitzOverrides& lip, int horizon) {
  (void)horizon;
  require(p.dt > 0 && p.u_max > 0, "integrator: dt and u_max must be positive");
  require(p.eps > 0, "integrator: eps must be positive");

  PlantBundle b;
  b.ld = lip_or(lip.ld, 0.02);
  const double lh = lip_or(lip.lh_x, 0.894);
  const double lh_k = lip_or(lip.lh_k, 0.072);
  const double lf_step = lip_or(lip.lf_step, 0.11);
  const double a = lip.boundary_layer ? *lip.boundary_layer : compute_boundary_layer(lh, lf_step, b.ld, lh_k);
  if (!(p.eps > a)) fail(ErrorCode::config, "integrator: eps must exceed the boundary layer a");
  if (!(p.eps > lh * b.ld)) fail(ErrorCode::config, "integrator: eps must exceed lh_x * ld");
  b.info["boundary_layer"] = a;

  PlantModel& plant = b.model.plant;
  plant.name = "integrator";
  plant.n_states = 1;
  plant.n_inputs = 1;
  plant.input_lower = Vec::Constant(1, -p.u_max);
  plant.input_upper = Vec::Constant(1, p.u_max);
  plant.lf_x = lip_or(lip.lf_x, 1.0);
  plant.lf_step = lf_step;
  const double dt = p.dt;
  plant.step = [dt](const Vec& x, const Vec& u, long) { return Vec(x + dt * u); };
  plant.jacobian = [dt](const Vec&, const Vec&, long) {
    return StepJacobian{Mat::Identity(1, 1), Mat::Constant(1, 1, dt)};
  };

  auto h_eval = [p](const Vec& x, long k) {
    const double e = x[0] - p.reference(k);
    return p.eps - e * e;
  };
  auto h_grad = [p](const Vec& x, long k) { return Vec::Constant(1, -2.0 * (x[0] - p.reference(k))); };

  ConstraintFn tube;
  tube.label = "tube";
  tube.lb_x = lip_or(lip.lb_x, lh);
  tube.eval = h_eval;
  tube.gradient = h_grad;
  b.model.constraints = {tube};

  BarrierFn& h = b.model.barrier;
  h.lh_x = lh;
  h.lh_k = lh_k;
  h.boundary_layer_a = a;
  h.eval = h_eval;
  h.gradient = h_grad;

  const double ld = b.ld;
  b.candidate = [p, lh, ld](const Vec& x, long k) {
    return Vec::Constant(1, integrator_candidate(x[0], k, p.eps, lh, ld, p.dt,
                                                 [&p](long kk) { return p.reference(kk); }));
  };
  plant.feasible_control = b.candidate;

  const double reach = std::abs(p.ref_amplitude) + std::sqrt(p.eps);
  b.cert_grid = GridBox{Vec::Constant(1, -reach), Vec::Constant(1, reach), {2001}};
  const long period = static_cast<long>(std::ceil(2.0 * M_PI / std::max(std::abs(p.ref_omega), 1e-9)));
  for (long k = 0; k < std::min(period, 10000L); ++k) b.cert_ks.push_back(k);
  return b;
}

// ---------------------------------------------------------------------------

PlantBundle make_plant(const std::string& name, const std::map<std::string, std::string>& params,
                       const LipschitzOverrides& lip, int horizon) {
  ParamReader r("plant", params);
  r.text("name", name);
  PlantBundle b;
  if (name == "two_tank") {
    TwoTankParams p;
    p.c1 = r.number("c1", p.c1);
    p.c2 = r.number("c2", p.c2);
    p.dt = r.number("dt", p.dt);
    p.x_min = r.number("x_min", p.x_min);
    p.x_max = r.number("x_max", p.x_max);
    p.eps = r.number("eps", p.eps);
    p.rho = r.number("rho", p.rho);
    p.xr1 = r.number("xr1", p.xr1);
    p.xr2 = r.number("xr2", p.xr2);
    p.u_max = r.number("u_max", p.u_max);
    p.w_bar = r.number("w_bar", p.w_bar);
    p.psi_degree = static_cast<int>(r.integer("psi_degree", p.psi_degree));
    p.psi_samples = static_cast<int>(r.integer("psi_samples", p.psi_samples));
    r.finish();
    b = make_two_tank(p, lip, horizon);
  } else if (name == "building") {
    BuildingParams p;
    p.u_max = r.number("u_max", p.u_max);
    p.y_ref = r.number("y_ref", p.y_ref);
    p.eps = r.number("eps", p.eps);
    p.night_low = r.number("night_low", p.night_low);
    p.night_high = r.number("night_high", p.night_high);
    p.day_low = r.number("day_low", p.day_low);
    p.day_high = r.number("day_high", p.day_high);
    p.period = r.integer("period", p.period);
    p.day_start = r.integer("day_start", p.day_start);
    p.day_end = r.integer("day_end", p.day_end);
    p.u_eq = r.number("u_eq", p.u_eq);
    p.w_hat_amplitude = r.number("w_hat_amplitude", p.w_hat_amplitude);
    p.w_hat_path = r.text("w_hat_path", "");
    r.finish();
    b = make_building(p, lip, horizon);
  } else if (name == "integrator") {
    IntegratorParams p;
    p.dt = r.number("dt", p.dt);
    p.u_max = r.number("u_max", p.u_max);
    p.ref_amplitude = r.number("ref_amplitude", p.ref_amplitude);
    p.ref_omega = r.number("ref_omega", p.ref_omega);
    p.eps = r.number("eps", p.eps);
    r.finish();
    b = make_integrator(p, lip, horizon);
  } else {
    fail(ErrorCode::config, "unknown plant '" + name + "' (expected two_tank, building or integrator)");
  }
  b.model.validate();
  return b;
}

}  // namespace safeguard
