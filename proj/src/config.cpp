#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace safeguard {

namespace pt = boost::property_tree;

std::string to_string(FilterMode m) {
  switch (m) {
    case FilterMode::nstep: return "nstep";
    case FilterMode::onestep: return "onestep";
    case FilterMode::off: return "off";
    case FilterMode::nonrobust: return "nonrobust";
  }
  return "nstep";
}

FilterMode filter_mode_from_string(const std::string& s) {
  for (auto m : {FilterMode::nstep, FilterMode::onestep, FilterMode::off, FilterMode::nonrobust}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorCode::config, "filter.mode: unknown mode '" + s + "' (nstep, onestep, off, nonrobust)");
}

bool CertifySettings::operator==(const CertifySettings& o) const {
  return resolution == o.resolution && same(lower, o.lower) && same(upper, o.upper) &&
         k_samples == o.k_samples && tolerance == o.tolerance;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return name == o.name && plant == o.plant && plant_params == o.plant_params &&
         lipschitz == o.lipschitz && disturbance == o.disturbance &&
         disturbance_ld == o.disturbance_ld && nominal == o.nominal && mode == o.mode &&
         filter == o.filter && steps == o.steps && same(x0, o.x0) && seeds == o.seeds &&
         certify == o.certify;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const Vec& v) {
  std::string s;
  for (long i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s;
}

template <class T>
std::string join_ints(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

std::string join_table(const std::vector<std::pair<long, Vec>>& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "; " : "") + std::to_string(t[i].first) + ": " + join(t[i].second);
  return s;
}

std::string join_matrix(const Mat& m) {
  std::string s;
  for (long r = 0; r < m.rows(); ++r) s += (r ? "; " : "") + join(m.row(r).transpose());
  return s;
}

// One INI section with consumption tracking for unknown-key diagnostics.
class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> values)
      : name_(std::move(name)), values_(std::move(values)), reader_(name_, values_) {}

  std::string field(const std::string& key) const { return name_ + "." + key; }

  double number(const std::string& key, double fallback) { return reader_.number(key, fallback); }
  std::optional<double> optional_number(const std::string& key) { return reader_.optional_number(key); }
  long integer(const std::string& key, long fallback) { return reader_.integer(key, fallback); }
  std::string text(const std::string& key, const std::string& fallback) { return reader_.text(key, fallback); }

  Vec vec(const std::string& key) {
    const auto parts = split(text(key, ""), ',');
    Vec v(static_cast<long>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v[i] = parse_number(name_, key, parts[i]);
    return v;
  }

  template <class T>
  std::vector<T> ints(const std::string& key) {
    std::vector<T> out;
    for (const auto& p : split(text(key, ""), ',')) {
      const auto dots = p.find("..");
      if (dots != std::string::npos) {
        // half-open range a..b
        const long a = parse_int(key, p.substr(0, dots));
        const long b = parse_int(key, p.substr(dots + 2));
        for (long i = a; i < b; ++i) out.push_back(static_cast<T>(i));
      } else {
        out.push_back(static_cast<T>(parse_int(key, p)));
      }
    }
    return out;
  }

  Mat matrix(const std::string& key) {
    const auto rows = split(text(key, ""), ';');
    Mat m;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto cells = split(rows[r], ',');
      if (r == 0) m.resize(static_cast<long>(rows.size()), static_cast<long>(cells.size()));
      if (static_cast<long>(cells.size()) != m.cols()) {
        fail(ErrorCode::config, field(key) + ": matrix rows have different lengths");
      }
      for (std::size_t c = 0; c < cells.size(); ++c) m(r, c) = parse_number(name_, key, cells[c]);
    }
    return m;
  }

  std::vector<std::pair<long, Vec>> table(const std::string& key) {
    std::vector<std::pair<long, Vec>> out;
    for (const auto& entry : split(text(key, ""), ';')) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) fail(ErrorCode::config, field(key) + ": expected 'k: values' entries");
      const auto cells = split(entry.substr(colon + 1), ',');
      Vec v(static_cast<long>(cells.size()));
      for (std::size_t i = 0; i < cells.size(); ++i) v[i] = parse_number(name_, key, cells[i]);
      out.emplace_back(parse_int(key, entry.substr(0, colon)), v);
    }
    return out;
  }

  void finish() const { reader_.finish(); }

 private:
  long parse_int(const std::string& key, const std::string& t) const {
    const double v = parse_number(name_, key, trim(t));
    if (v != std::floor(v)) fail(ErrorCode::config, field(key) + ": expected an integer, got '" + t + "'");
    return static_cast<long>(v);
  }

  std::string name_;
  std::map<std::string, std::string> values_;
  ParamReader reader_;
};

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    fail(ErrorCode::config, what + ": " + e.what());
  }
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                            const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::config, origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || o.substr(0, eq).find('.') == std::string::npos) {
      fail(ErrorCode::config, "override '" + o + "': expected section.key=value");
    }
    tree.put(pt::ptree::path_type(trim(o.substr(0, eq)), '.'), trim(o.substr(eq + 1)));
  }

  std::map<std::string, std::map<std::string, std::string>> raw;
  for (const auto& [section, body] : tree) {
    static const std::set<std::string> known = {"scenario", "plant", "lipschitz", "disturbance",
                                                "nominal", "filter", "certify"};
    if (!known.count(section)) fail(ErrorCode::config, origin + ": unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) {
      fail(ErrorCode::config, origin + ": key '" + section + "' must live inside a section");
    }
    for (const auto& [key, value] : body) {
      if (!value.empty()) fail(ErrorCode::config, origin + ": nested key under " + section + "." + key);
      raw[section][key] = value.data();
    }
  }

  ScenarioConfig cfg;
  Section sc("scenario", raw["scenario"]);
  cfg.name = sc.text("name", cfg.name);
  cfg.plant = sc.text("plant", "");
  if (cfg.plant.empty()) fail(ErrorCode::config, origin + ": missing required field scenario.plant");
  cfg.steps = sc.integer("steps", cfg.steps);
  if (cfg.steps < 1) fail(ErrorCode::config, "scenario.steps: must be >= 1");
  cfg.x0 = sc.vec("x0");
  if (cfg.x0.size() == 0) fail(ErrorCode::config, origin + ": missing required field scenario.x0");
  cfg.seeds = sc.ints<std::uint64_t>("seeds");
  sc.finish();

  cfg.plant_params = raw["plant"];
  cfg.plant_params.erase("name");

  Section lp("lipschitz", raw["lipschitz"]);
  cfg.lipschitz.lf_x = lp.optional_number("lf_x");
  cfg.lipschitz.lb_x = lp.optional_number("lb_x");
  cfg.lipschitz.lh_x = lp.optional_number("lh_x");
  cfg.lipschitz.lh_k = lp.optional_number("lh_k");
  cfg.lipschitz.lf_step = lp.optional_number("lf_step");
  cfg.lipschitz.ld = lp.optional_number("ld");
  cfg.lipschitz.boundary_layer = lp.optional_number("boundary_layer");
  lp.finish();

  Section ds("disturbance", raw["disturbance"]);
  auto& d = cfg.disturbance;
  d.kind = guarded("disturbance.kind", [&] { return disturbance_kind_from_string(ds.text("kind", "none")); });
  cfg.disturbance_ld = ds.optional_number("ld");
  d.norm = guarded("disturbance.norm", [&] { return norm_convention_from_string(ds.text("norm", "euclidean")); });
  d.amplitude = ds.number("amplitude", 0.0);
  d.frequency = ds.number("frequency", 1.0);
  d.axes = ds.ints<int>("axes");
  d.seed = static_cast<std::uint64_t>(ds.integer("seed", 0));
  d.random_fraction = ds.number("random_fraction", 0.0);
  d.signs = ds.ints<int>("signs");
  d.path = ds.text("path", "");
  ds.finish();

  Section ns("nominal", raw["nominal"]);
  auto& n = cfg.nominal;
  n.kind = guarded("nominal.kind", [&] { return policy_kind_from_string(ns.text("kind", "zero")); });
  n.gain = ns.matrix("gain");
  n.offset = ns.vec("offset");
  const std::string ref_kind = ns.text("reference_kind", "steps");
  if (ref_kind != "steps" && ref_kind != "sinusoid") {
    fail(ErrorCode::config, "nominal.reference_kind: expected steps or sinusoid, got '" + ref_kind + "'");
  }
  n.reference.sinusoidal = ref_kind == "sinusoid";
  n.reference.steps = ns.table("reference");
  n.reference.offset = ns.vec("reference_offset");
  n.reference.amplitude = ns.number("reference_amplitude", 0.0);
  n.reference.omega = ns.number("reference_omega", 0.0);
  n.reference.lead = ns.integer("reference_lead", 0);
  n.table = ns.table("table");
  n.path = ns.text("path", "");
  ns.finish();

  Section fs("filter", raw["filter"]);
  auto& f = cfg.filter;
  cfg.mode = filter_mode_from_string(fs.text("mode", "nstep"));
  f.horizon_n = static_cast<int>(fs.integer("horizon", f.horizon_n));
  const std::string mm = fs.text("margin_mode", "robust");
  if (mm != "robust" && mm != "nominal") fail(ErrorCode::config, "filter.margin_mode: expected robust or nominal");
  f.margin_mode = mm == "robust" ? MarginMode::robust : MarginMode::nominal;
  const std::string tm = fs.text("trigger_mode", "event_triggered");
  if (tm != "event_triggered" && tm != "always_solve") {
    fail(ErrorCode::config, "filter.trigger_mode: expected event_triggered or always_solve");
  }
  f.trigger_mode = tm == "event_triggered" ? TriggerMode::event_triggered : TriggerMode::always_solve;
  f.tol_feas = fs.number("tol_feas", f.tol_feas);
  f.tol_opt = fs.number("tol_opt", f.tol_opt);
  f.max_iter = static_cast<int>(fs.integer("max_iter", f.max_iter));
  f.multistart_seed = static_cast<std::uint64_t>(fs.integer("multistart_seed", static_cast<long>(f.multistart_seed)));
  fs.finish();
  guarded("filter", [&] {
    f.validate();
    return 0;
  });

  Section cs("certify", raw["certify"]);
  cfg.certify.resolution = cs.ints<int>("resolution");
  cfg.certify.lower = cs.vec("lower");
  cfg.certify.upper = cs.vec("upper");
  cfg.certify.k_samples = cs.ints<long>("k_samples");
  cfg.certify.tolerance = cs.number("tolerance", cfg.certify.tolerance);
  cs.finish();
  return cfg;
}

ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig cfg = parse_config(ss.str(), overrides, path);
  // data files are looked up next to the config file
  const auto base = std::filesystem::path(path).parent_path();
  auto anchor = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (base / p).string();
    }
  };
  anchor(cfg.disturbance.path);
  anchor(cfg.nominal.path);
  if (cfg.plant_params.count("w_hat_path")) anchor(cfg.plant_params["w_hat_path"]);
  return cfg;
}

std::string serialize_config(const ScenarioConfig& cfg) {
  std::ostringstream o;
  o << "[scenario]\n";
  o << "name = " << cfg.name << "\n";
  o << "plant = " << cfg.plant << "\n";
  o << "steps = " << cfg.steps << "\n";
  o << "x0 = " << join(cfg.x0) << "\n";
  if (!cfg.seeds.empty()) o << "seeds = " << join_ints(cfg.seeds) << "\n";

  o << "\n[plant]\n";
  for (const auto& [k, v] : cfg.plant_params) o << k << " = " << v << "\n";

  o << "\n[lipschitz]\n";
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) o << key << " = " << num(*v) << "\n";
  };
  const auto& l = cfg.lipschitz;
  opt("lf_x", l.lf_x);
  opt("lb_x", l.lb_x);
  opt("lh_x", l.lh_x);
  opt("lh_k", l.lh_k);
  opt("lf_step", l.lf_step);
  opt("ld", l.ld);
  opt("boundary_layer", l.boundary_layer);

  const auto& d = cfg.disturbance;
  o << "\n[disturbance]\n";
  o << "kind = " << to_string(d.kind) << "\n";
  opt("ld", cfg.disturbance_ld);
  o << "norm = " << to_string(d.norm) << "\n";
  o << "amplitude = " << num(d.amplitude) << "\n";
  o << "frequency = " << num(d.frequency) << "\n";
  if (!d.axes.empty()) o << "axes = " << join_ints(d.axes) << "\n";
  o << "seed = " << d.seed << "\n";
  o << "random_fraction = " << num(d.random_fraction) << "\n";
  if (!d.signs.empty()) o << "signs = " << join_ints(d.signs) << "\n";
  if (!d.path.empty()) o << "path = " << d.path << "\n";

  const auto& n = cfg.nominal;
  o << "\n[nominal]\n";
  o << "kind = " << to_string(n.kind) << "\n";
  if (n.gain.size()) o << "gain = " << join_matrix(n.gain) << "\n";
  if (n.offset.size()) o << "offset = " << join(n.offset) << "\n";
  o << "reference_kind = " << (n.reference.sinusoidal ? "sinusoid" : "steps") << "\n";
  if (!n.reference.steps.empty()) o << "reference = " << join_table(n.reference.steps) << "\n";
  if (n.reference.offset.size()) o << "reference_offset = " << join(n.reference.offset) << "\n";
  o << "reference_amplitude = " << num(n.reference.amplitude) << "\n";
  o << "reference_omega = " << num(n.reference.omega) << "\n";
  o << "reference_lead = " << n.reference.lead << "\n";
  if (!n.table.empty()) o << "table = " << join_table(n.table) << "\n";
  if (!n.path.empty()) o << "path = " << n.path << "\n";

  const auto& f = cfg.filter;
  o << "\n[filter]\n";
  o << "mode = " << to_string(cfg.mode) << "\n";
  o << "horizon = " << f.horizon_n << "\n";
  o << "margin_mode = " << to_string(f.margin_mode) << "\n";
  o << "trigger_mode = " << to_string(f.trigger_mode) << "\n";
  o << "tol_feas = " << num(f.tol_feas) << "\n";
  o << "tol_opt = " << num(f.tol_opt) << "\n";
  o << "max_iter = " << f.max_iter << "\n";
  o << "multistart_seed = " << f.multistart_seed << "\n";

  const auto& c = cfg.certify;
  o << "\n[certify]\n";
  if (!c.resolution.empty()) o << "resolution = " << join_ints(c.resolution) << "\n";
  if (c.lower.size()) o << "lower = " << join(c.lower) << "\n";
  if (c.upper.size()) o << "upper = " << join(c.upper) << "\n";
  if (!c.k_samples.empty()) o << "k_samples = " << join_ints(c.k_samples) << "\n";
  o << "tolerance = " << num(c.tolerance) << "\n";
  return o.str();
}

}  // namespace safeguard
