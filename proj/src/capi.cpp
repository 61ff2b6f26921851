#include "safeguard/safeguard.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "sim.hpp"

using namespace safeguard;

struct sg_scenario {
  ResolvedScenario resolved;
};

struct sg_filter {
  std::unique_ptr<SafetyFilter> filter;
  int n = 0, m = 0;
};

namespace {

thread_local std::string last_error;

sg_status code_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return SG_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return SG_ERR_IO;
    case ErrorCode::config: return SG_ERR_CONFIG;
    case ErrorCode::numeric: return SG_ERR_NUMERIC;
    case ErrorCode::infeasible: return SG_ERR_INFEASIBLE;
    case ErrorCode::internal: return SG_ERR_INTERNAL;
  }
  return SG_ERR_INTERNAL;
}

template <class F>
sg_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return SG_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return code_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return SG_ERR_INTERNAL;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::vector<std::string> override_list(const char* const* overrides, size_t n) {
  require(n == 0 || overrides != nullptr, "overrides is NULL");
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    require(overrides[i] != nullptr, "override entry is NULL");
    out.emplace_back(overrides[i]);
  }
  return out;
}

void fill_stats(sg_run_stats* stats, const std::vector<RunResult>& runs) {
  if (!stats) return;
  *stats = sg_run_stats{};
  stats->runs = static_cast<long>(runs.size());
  stats->min_slack = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    const RunSummary& s = r.summary;
    stats->steps = std::max(stats->steps, s.steps);
    stats->violations += s.violations;
    stats->faults += s.faults;
    stats->errors += s.error ? 1 : 0;
    for (const auto& [label, v] : s.min_slack) stats->min_slack = std::min(stats->min_slack, v);
    if (s.min_slack.empty()) stats->min_slack = std::min(stats->min_slack, s.min_h);
    stats->trigger_fraction += s.trigger_fraction / double(runs.size());
    stats->total_solve_ms += s.total_solve_ms;
  }
}

std::string margins_text(const ResolvedScenario& sc, bool& pass) {
  std::ostringstream o;
  o.precision(6);
  const SafetyModel& model = sc.bundle.model;
  const double ld = sc.bundle.ld;
  o << "plant " << model.plant.name << ", mode " << to_string(sc.config.mode) << ", margins "
    << to_string(sc.filter.margin_mode) << "\n";
  o << "L_d = " << ld << "  L_f = " << model.plant.lf_x << "  L_h = " << model.barrier.lh_x << "\n";
  if (sc.kind == FilterKind::onestep) {
    const Margins m = one_step_margins(model, ld, sc.filter.margin_mode);
    o << "terminal (h at k+1) = " << m.terminal << "\n";
    if (model.barrier.boundary_layer_a) o << "boundary layer a = " << *model.barrier.boundary_layer_a << "\n";
  } else {
    const Margins m = build_margins(model, ld, sc.filter);
    o << "horizon N = " << m.horizon << "\n";
    o << "l";
    for (const auto& c : model.constraints) o << "\t" << c.label;
    o << "\n";
    for (int l = 0; l <= m.horizon; ++l) {
      o << l;
      for (std::size_t i = 0; i < model.constraints.size(); ++i) o << "\t" << m.at(i, l);
      o << "\n";
    }
    o << "terminal = " << m.terminal << "\n";
  }
  const SetCheckReport rep = check_scenario_sets(sc);
  pass = rep.pass();
  o << "set check: " << (pass ? "pass" : "fail") << "\n" << rep.to_json() << "\n";
  return o.str();
}

}  // namespace

extern "C" {

const char* sg_version(void) { return SAFEGUARD_VERSION; }

const char* sg_last_error(void) { return last_error.c_str(); }

void sg_string_free(char* s) { std::free(s); }

sg_status sg_scenario_load(const char* path, const char* const* overrides, size_t n_overrides,
                           sg_scenario** out) {
  return guard([&] {
    require(path && out, "sg_scenario_load: NULL argument");
    *out = nullptr;
    auto s = std::make_unique<sg_scenario>();
    s->resolved = resolve(load_config(path, override_list(overrides, n_overrides)));
    *out = s.release();
  });
}

sg_status sg_scenario_parse(const char* text, const char* const* overrides, size_t n_overrides,
                            sg_scenario** out) {
  return guard([&] {
    require(text && out, "sg_scenario_parse: NULL argument");
    *out = nullptr;
    auto s = std::make_unique<sg_scenario>();
    s->resolved = resolve(parse_config(text, override_list(overrides, n_overrides)));
    *out = s.release();
  });
}

void sg_scenario_free(sg_scenario* scenario) { delete scenario; }

sg_status sg_scenario_dims(const sg_scenario* scenario, size_t* n_states, size_t* n_inputs) {
  return guard([&] {
    require(scenario != nullptr, "sg_scenario_dims: NULL scenario");
    const PlantModel& p = scenario->resolved.bundle.model.plant;
    if (n_states) *n_states = static_cast<size_t>(p.n_states);
    if (n_inputs) *n_inputs = static_cast<size_t>(p.n_inputs);
  });
}

sg_status sg_scenario_serialize(const sg_scenario* scenario, char** text) {
  return guard([&] {
    require(scenario && text, "sg_scenario_serialize: NULL argument");
    *text = dup(serialize_config(scenario->resolved.config));
  });
}

sg_status sg_simulate(const sg_scenario* scenario, const char* out_dir, sg_run_stats* stats,
                      char** artifacts) {
  return guard([&] {
    require(scenario && out_dir, "sg_simulate: NULL argument");
    const ResolvedScenario& sc = scenario->resolved;
    const std::filesystem::path dir(out_dir);
    std::vector<std::string> files;
    std::vector<RunResult> runs;
    if (sc.config.seeds.empty()) {
      runs.push_back(run_closed_loop(sc));
      files = write_run(dir.string(), runs.back());
    } else {
      runs = run_ensemble(sc.config, sc.config.seeds);
      nlohmann::json all = nlohmann::json::array();
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto sub = dir / ("seed_" + std::to_string(sc.config.seeds[i]));
        for (auto& f : write_run(sub.string(), runs[i])) files.push_back(f);
        all.push_back(nlohmann::json::parse(runs[i].summary.to_json()));
      }
      sg_run_stats agg;
      fill_stats(&agg, runs);
      nlohmann::json j;
      j["scenario"] = sc.config.name;
      j["runs"] = agg.runs;
      j["violations"] = agg.violations;
      j["faults"] = agg.faults;
      j["errors"] = agg.errors;
      j["min_slack"] = agg.min_slack;
      j["mean_trigger_fraction"] = agg.trigger_fraction;
      j["total_solve_ms"] = agg.total_solve_ms;
      j["per_seed"] = all;
      const auto path = (dir / "summary.json").string();
      write_text(path, j.dump(2));
      files.push_back(path);
    }
    fill_stats(stats, runs);
    if (artifacts) *artifacts = dup(join(files));
  });
}

sg_status sg_certify(const sg_scenario* scenario, const char* out_dir, sg_cert_stats* stats, char** artifacts) {
  return guard([&] {
    require(scenario && out_dir, "sg_certify: NULL argument");
    const CertReport rep = certify_scenario(scenario->resolved);
    const auto path = (std::filesystem::path(out_dir) / "certificate.json").string();
    write_text(path, rep.to_json());
    if (stats) {
      stats->pass = rep.pass() ? 1 : 0;
      stats->grid_points = rep.grid_points;
      stats->points_in_c = rep.points_in_C;
      stats->failures = static_cast<long>(rep.failures.size());
      stats->min_slack = rep.min_slack;
      stats->max_abs_input = rep.max_abs_input;
      stats->threshold = rep.threshold;
    }
    if (artifacts) *artifacts = dup(path + "\n");
  });
}

sg_status sg_margins_report(const sg_scenario* scenario, char** text, int* assumption_pass) {
  return guard([&] {
    require(scenario && text, "sg_margins_report: NULL argument");
    bool pass = false;
    *text = dup(margins_text(scenario->resolved, pass));
    if (assumption_pass) *assumption_pass = pass ? 1 : 0;
  });
}

sg_status sg_write_manifest(const char* out_dir, const char* config_path, const char* command, int exit_status,
                            const char* artifacts) {
  return guard([&] {
    require(out_dir && config_path && command, "sg_write_manifest: NULL argument");
    std::vector<std::string> files;
    std::istringstream in(artifacts ? artifacts : "");
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) files.push_back(line);
    }
    write_manifest(out_dir, config_path, command, exit_status, files);
  });
}

double sg_stage_margin(double lb_x, double ld, double lf_x, int l) {
  double v = std::numeric_limits<double>::quiet_NaN();
  guard([&] { v = stage_margin(lb_x, ld, lf_x, l); });
  return v;
}

double sg_terminal_margin(double lh_x, double ld, double lf_x, int n) {
  double v = std::numeric_limits<double>::quiet_NaN();
  guard([&] { v = terminal_margin(lh_x, ld, lf_x, n); });
  return v;
}

double sg_boundary_layer(double lh_x, double lf_step, double ld, double lh_k) {
  double v = std::numeric_limits<double>::quiet_NaN();
  guard([&] { v = compute_boundary_layer(lh_x, lf_step, ld, lh_k); });
  return v;
}

sg_status sg_filter_create(const sg_scenario* scenario, sg_policy_fn policy, void* user, sg_filter** out) {
  return guard([&] {
    require(scenario && out, "sg_filter_create: NULL argument");
    *out = nullptr;
    const ResolvedScenario& sc = scenario->resolved;
    const PlantModel& plant = sc.bundle.model.plant;
    NominalPolicy nominal = sc.policy;
    if (policy) {
      const int n = plant.n_states, m = plant.n_inputs;
      nominal = NominalPolicy::from_callback(
          [policy, user, n, m](const Vec& x, long k) {
            Vec u = Vec::Zero(m);
            if (policy(x.data(), static_cast<size_t>(n), k, u.data(), static_cast<size_t>(m), user) != 0) {
              fail(ErrorCode::invalid_argument, "policy callback reported failure at k = " + std::to_string(k));
            }
            return u;
          },
          plant);
    }
    auto f = std::make_unique<sg_filter>();
    f->n = plant.n_states;
    f->m = plant.n_inputs;
    f->filter = std::make_unique<SafetyFilter>(sc.bundle.model, nominal, sc.filter, sc.bundle.ld, sc.kind);
    *out = f.release();
  });
}

sg_status sg_filter_step(sg_filter* filter, const double* x, long k, double* u, sg_step_info* info) {
  return guard([&] {
    require(filter && x && u, "sg_filter_step: NULL argument");
    const Vec xv = Eigen::Map<const Vec>(x, filter->n);
    const FilterDecision d = filter->filter->step(xv, k);
    for (int j = 0; j < filter->m; ++j) u[j] = d.applied[j];
    if (info) {
      info->triggered = d.triggered ? 1 : 0;
      info->source = static_cast<sg_source>(static_cast<int>(d.source));
      info->solve_ms = d.solve_ms;
      info->h = d.h;
    }
  });
}

void sg_filter_reset(sg_filter* filter) {
  if (filter) filter->filter->reset();
}

void sg_filter_free(sg_filter* filter) { delete filter; }

}  // extern "C"
