#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "plants.hpp"

namespace safeguard {

enum class FilterMode { nstep, onestep, off, nonrobust };
std::string to_string(FilterMode m);
FilterMode filter_mode_from_string(const std::string& s);

struct CertifySettings {
  std::vector<int> resolution;  // empty = plant default
  Vec lower, upper;             // empty = plant default
  std::vector<long> k_samples;  // empty = plant default
  double tolerance = 1e-12;

  bool operator==(const CertifySettings& o) const;
};

/// Everything needed to build and run one closed-loop scenario.
struct ScenarioConfig {
  std::string name = "scenario";
  std::string plant;
  std::map<std::string, std::string> plant_params;
  LipschitzOverrides lipschitz;
  DisturbanceSpec disturbance;
  std::optional<double> disturbance_ld;  // unset: the plant's L_d budget minus its model error
  PolicySpec nominal;
  FilterMode mode = FilterMode::nstep;
  FilterConfig filter;
  long steps = 500;
  Vec x0;
  std::vector<std::uint64_t> seeds;  // ensemble; empty = single run with disturbance.seed
  CertifySettings certify;

  bool operator==(const ScenarioConfig& o) const;
};

/// Parses INI text. `overrides` are "section.key=value" strings applied on top.
ScenarioConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                            const std::string& origin = "<string>");
ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
std::string serialize_config(const ScenarioConfig& cfg);

}  // namespace safeguard
