#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace safeguard {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode { invalid_argument, io, config, numeric, infeasible, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);
void require(bool cond, const std::string& what);

bool all_finite(const Vec& v);

// ---------------------------------------------------------------------------
// Plant

using StepFn = std::function<Vec(const Vec& x, const Vec& u, long k)>;

struct StepJacobian {
  Mat dx;  // n x n
  Mat du;  // n x m
};
using JacobianFn = std::function<StepJacobian(const Vec& x, const Vec& u, long k)>;

using ControlMap = std::function<Vec(const Vec& x, long k)>;

/// Known discrete-time model x+ = f(x, u, k) with an input box.
///
/// `truth_step` is the map used when simulating the real system; when empty
/// the model itself is the truth and all mismatch lives in the disturbance.
struct PlantModel {
  std::string name;
  int n_states = 0;
  int n_inputs = 0;
  Vec input_lower;
  Vec input_upper;
  StepFn step;
  JacobianFn jacobian;
  StepFn truth_step;
  double lf_x = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> lf_step;
  ControlMap feasible_control;

  void validate() const;
  Vec truth(const Vec& x, const Vec& u, long k) const {
    return truth_step ? truth_step(x, u, k) : step(x, u, k);
  }
  Vec box_center() const { return 0.5 * (input_lower + input_upper); }
};

/// Forward-difference Jacobian of the plant map, step 1e-6 scaled by |v|.
StepJacobian finite_difference_jacobian(const PlantModel& plant, const Vec& x, const Vec& u,
                                        long k);
StepJacobian plant_jacobian(const PlantModel& plant, const Vec& x, const Vec& u, long k);

// ---------------------------------------------------------------------------
// Constraints and barriers

using ScalarFn = std::function<double(const Vec& x, long k)>;
using GradientFn = std::function<Vec(const Vec& x, long k)>;

struct ConstraintFn {
  std::string label;
  ScalarFn eval;
  GradientFn gradient;  // optional
  double lb_x = 0.0;
};

struct BarrierFn {
  ScalarFn eval;
  GradientFn gradient;  // optional
  double lh_x = 0.0;
  std::optional<double> lh_k;
  std::optional<double> boundary_layer_a;

  void validate() const;
};

/// Central-difference gradient used when a function carries no analytic one.
Vec numeric_gradient(const ScalarFn& fn, const Vec& x, long k);
Vec gradient_of(const ConstraintFn& c, const Vec& x, long k);
Vec gradient_of(const BarrierFn& h, const Vec& x, long k);

// ---------------------------------------------------------------------------
// Disturbances

enum class DisturbanceKind { none, sinusoid, uniform_random, extreme_corner, file, adversarial };
enum class NormConvention { euclidean, componentwise };

std::string to_string(DisturbanceKind kind);
DisturbanceKind disturbance_kind_from_string(const std::string& s);
std::string to_string(NormConvention norm);
NormConvention norm_convention_from_string(const std::string& s);

struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::none;
  double ld = 0.0;
  NormConvention norm = NormConvention::euclidean;
  // sinusoid: amplitude * sin(frequency * k) on every axis flagged in `axes`
  double amplitude = 0.0;
  double frequency = 1.0;
  std::vector<int> axes;  // empty = all axes
  // uniform_random / adversarial
  std::uint64_t seed = 0;
  double random_fraction = 0.0;  // adversarial: share of steps drawn at random
  // extreme_corner: +1/-1 per axis, empty = all negative
  std::vector<int> signs;
  // file: CSV `k,d0,...,d{n-1}`
  std::string path;

  bool operator==(const DisturbanceSpec&) const = default;
};

double vector_norm(const Vec& v, NormConvention norm);

/// Scores a candidate disturbance; the adversarial kind picks the corner with
/// the lowest score.
using DisturbanceScore = std::function<double(const Vec& d)>;

/// Immutable realization of a DisturbanceSpec. Random draws are a pure
/// function of (seed, k), so a realization can be replayed step by step.
class Disturbance {
 public:
  Disturbance() = default;
  Disturbance(DisturbanceSpec spec, int n_states);

  const DisturbanceSpec& spec() const { return spec_; }
  Vec realize(const Vec& x, const Vec& u, long k, const DisturbanceScore& score = {}) const;

 private:
  Vec uniform_in_ball(long k, std::uint64_t stream) const;
  Vec corner(const std::vector<int>& signs) const;
  Vec enforce_bound(Vec d, long k) const;

  DisturbanceSpec spec_;
  int n_ = 0;
  std::vector<std::pair<long, Vec>> table_;
};

Vec realize_disturbance(const DisturbanceSpec& spec, const Vec& x, const Vec& u, long k,
                        const PlantModel& plant);

// ---------------------------------------------------------------------------
// Nominal policy

enum class PolicyKind { zero, proportional_tracker, schedule, file_lookup, callback };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

/// Reference used by the proportional tracker: either a piecewise-constant
/// table or offset + amplitude * sin(omega * (k + lead)) on every component.
struct ReferenceSchedule {
  std::vector<std::pair<long, Vec>> steps;
  bool sinusoidal = false;
  Vec offset;
  double amplitude = 0.0;
  double omega = 0.0;
  long lead = 0;

  Vec at(long k) const;
  bool operator==(const ReferenceSchedule& other) const;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::zero;
  Mat gain;    // m x n, proportional tracker
  Vec offset;  // m, proportional tracker feed-forward
  ReferenceSchedule reference;
  std::vector<std::pair<long, Vec>> table;  // schedule
  std::string path;                         // file_lookup

  bool operator==(const PolicySpec& other) const;
};

/// Nominal control law u_nom(x, k); outputs are always clamped into the box.
class NominalPolicy {
 public:
  NominalPolicy() = default;
  NominalPolicy(PolicySpec spec, const PlantModel& plant);
  static NominalPolicy from_callback(std::function<Vec(const Vec&, long)> fn,
                                     const PlantModel& plant);

  Vec operator()(const Vec& x, long k) const;
  const PolicySpec& spec() const { return spec_; }

 private:
  Vec raw(const Vec& x, long k) const;

  PolicySpec spec_;
  Vec lower_;
  Vec upper_;
  int m_ = 0;
  std::function<Vec(const Vec&, long)> callback_;
};

// ---------------------------------------------------------------------------
// Filter configuration

enum class MarginMode { robust, nominal };
enum class TriggerMode { event_triggered, always_solve };

std::string to_string(MarginMode mode);
std::string to_string(TriggerMode mode);

struct FilterConfig {
  int horizon_n = 1;
  MarginMode margin_mode = MarginMode::robust;
  TriggerMode trigger_mode = TriggerMode::event_triggered;
  double tol_feas = 1e-8;
  double tol_opt = 1e-8;
  int max_iter = 200;
  std::uint64_t multistart_seed = 7;

  void validate() const;
  bool operator==(const FilterConfig&) const = default;
};

// ---------------------------------------------------------------------------

/// Plant plus the constraint functions b_i and the barrier h it is filtered against.
struct SafetyModel {
  PlantModel plant;
  std::vector<ConstraintFn> constraints;
  BarrierFn barrier;

  void validate() const;
};

// ---------------------------------------------------------------------------

Vec clamp_to_box(const Vec& u, const PlantModel& plant);
Vec clamp_to_box(const Vec& u, const Vec& lower, const Vec& upper);

/// Reads a numeric CSV with a header row; returns rows keyed by the first column.
std::vector<std::pair<long, Vec>> read_keyed_csv(const std::string& path, int expected_cols);

/// Size-aware exact equality (Eigen's operator== requires equal shapes).
bool same(const Mat& a, const Mat& b);
bool same(const Vec& a, const Vec& b);
bool same(const std::vector<std::pair<long, Vec>>& a, const std::vector<std::pair<long, Vec>>& b);

/// splitmix64, used to derive independent streams from (seed, k).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace safeguard
