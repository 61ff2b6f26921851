#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"
#include "margins.hpp"

namespace safeguard {

/// Flat string key/value parameters; every key must be consumed or `finish`
/// reports it as unknown.
class ParamReader {
 public:
  ParamReader(std::string section, const std::map<std::string, std::string>& values);

  double number(const std::string& key, double fallback);
  std::optional<double> optional_number(const std::string& key);
  long integer(const std::string& key, long fallback);
  std::string text(const std::string& key, const std::string& fallback);
  void finish() const;

 private:
  std::string section_;
  const std::map<std::string, std::string>& values_;
  std::set<std::string> used_;
};

double parse_number(const std::string& section, const std::string& key, const std::string& text);

// ---------------------------------------------------------------------------
// Polynomial fit of the tank outflow law

struct PolyFit {
  std::vector<double> coeffs;  // in t = (x - center) / radius, lowest power first
  double center = 0.0;
  double radius = 1.0;
  double max_residual = 0.0;  // sup over a dense check grid on the fit interval

  double operator()(double x) const;
  double derivative(double x) const;
};

PolyFit fit_polynomial(const std::function<double(double)>& target, int degree, double lo, double hi,
                       int samples);
PolyFit fit_psi(int degree = 7, double lo = 0.2, double hi = 1.0, int samples = 2001);

// ---------------------------------------------------------------------------

struct LipschitzOverrides {
  std::optional<double> lf_x, lb_x, lh_x, lh_k, lf_step, ld, boundary_layer;

  bool operator==(const LipschitzOverrides&) const = default;
};

/// A ready-to-simulate example system.
struct PlantBundle {
  SafetyModel model;
  double ld = 0.0;           // L_d used by the filter margins
  double model_error = 0.0;  // sup ||truth - model||, part of the L_d budget
  ControlMap candidate;      // certification control
  GridBox cert_grid;
  std::vector<long> cert_ks;
  std::map<std::string, double> info;
};

struct TwoTankParams {
  double c1 = 0.8, c2 = 0.4, dt = 0.1;
  double x_min = 0.2, x_max = 1.0;
  double eps = 0.12, rho = 2.69;
  double xr1 = 0.63, xr2 = 0.63;
  double u_max = 1.0;  // input box [0, u_max]^2
  double w_bar = 1e-5;
  int psi_degree = 7;
  int psi_samples = 2001;
};

struct BuildingParams {
  Mat A;
  Vec B;
  double u_max = 5000.0;
  double y_ref = 20.0;
  double eps = 0.9;
  double night_low = 18.5, night_high = 21.5;
  double day_low = 19.3, day_high = 20.7;
  long period = 240, day_start = 80, day_end = 200;
  double u_eq = 2500.0;
  double w_hat_amplitude = 0.05;
  std::string w_hat_path;

  BuildingParams();
  double upper(long k) const;
  double lower(long k) const;
};

struct IntegratorParams {
  double dt = 0.01;
  double u_max = 10.0;
  double ref_amplitude = 0.5;
  double ref_omega = 0.05;
  double eps = 0.2;

  double reference(long k) const { return ref_amplitude * std::sin(ref_omega * double(k)); }
};

PlantBundle make_two_tank(const TwoTankParams& p, const LipschitzOverrides& lip, int horizon);
PlantBundle make_building(const BuildingParams& p, const LipschitzOverrides& lip, int horizon);
PlantBundle make_integrator(const IntegratorParams& p, const LipschitzOverrides& lip, int horizon);

/// Builds a plant by name ("two_tank", "building", "integrator") from [plant] keys.
PlantBundle make_plant(const std::string& name, const std::map<std::string, std::string>& params,
                       const LipschitzOverrides& lip, int horizon);

/// Two-tank certification control: zero when the drift alone clears the
/// threshold, otherwise the input whose bilinear inflow best matches the
/// one-step return to the reference.
Vec two_tank_candidate(const Vec& x, const TwoTankParams& p, const PolyFit& psi, double threshold);

/// Least-squares fit of the bilinear inflow map to targets y over [0, u_max]^2.
Vec two_tank_inflow_match(double y1, double y2, const TwoTankParams& p);

/// Integrator certification control; requires eps > lh_x * ld.
double integrator_candidate(double x, long k, double eps, double lh_x, double ld, double dt,
                            const std::function<double(long)>& reference);

}  // namespace safeguard
