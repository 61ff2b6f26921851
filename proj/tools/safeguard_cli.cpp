#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "safeguard/safeguard.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_out) {
  cmd->add_option("-c,--config", c.config, "scenario config file")->required();
  cmd->add_option("-s,--set,--override", c.overrides, "section.key=value, repeatable");
  if (with_out) cmd->add_option("-o,--out", c.out, "output directory (default runs/<config stem>)");
}

std::string out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  return (std::filesystem::path("runs") / std::filesystem::path(c.config).stem()).string();
}

sg_scenario* load(const Common& c) {
  std::vector<const char*> ov;
  for (const auto& s : c.overrides) ov.push_back(s.c_str());
  sg_scenario* sc = nullptr;
  if (sg_scenario_load(c.config.c_str(), ov.data(), ov.size(), &sc) != SG_OK) {
    std::fprintf(stderr, "error: %s\n", sg_last_error());
    return nullptr;
  }
  return sc;
}

void manifest(const std::string& dir, const Common& c, const char* command, int status, const char* artifacts) {
  if (sg_write_manifest(dir.c_str(), c.config.c_str(), command, status, artifacts) != SG_OK) {
    std::fprintf(stderr, "warning: manifest not written: %s\n", sg_last_error());
  }
}

int simulate(const Common& c) {
  const std::string dir = out_dir(c);
  sg_scenario* sc = load(c);
  if (!sc) {
    manifest(dir, c, "simulate", 1, nullptr);
    return 1;
  }
  sg_run_stats st{};
  char* files = nullptr;
  const sg_status rc = sg_simulate(sc, dir.c_str(), &st, &files);
  sg_scenario_free(sc);
  int code = 0;
  if (rc != SG_OK) {
    std::fprintf(stderr, "error: %s\n", sg_last_error());
    code = 1;
  } else {
    std::printf("runs %ld  steps %ld  violations %ld  faults %ld  min slack %.6g  trigger fraction %.4f  solve %.1f ms\n",
                st.runs, st.steps, st.violations, st.faults, st.min_slack, st.trigger_fraction, st.total_solve_ms);
    if (st.errors > 0) {
      std::fprintf(stderr, "error: %ld run(s) ended on a numeric error, see summary.json\n", st.errors);
      code = 1;
    } else if (st.violations > 0) {
      code = 2;
    }
    std::printf("wrote %s\n", dir.c_str());
  }
  manifest(dir, c, "simulate", code, files);
  sg_string_free(files);
  return code;
}

int certify(const Common& c) {
  const std::string dir = out_dir(c);
  sg_scenario* sc = load(c);
  if (!sc) {
    manifest(dir, c, "certify", 1, nullptr);
    return 1;
  }
  sg_cert_stats st{};
  char* files = nullptr;
  const sg_status rc = sg_certify(sc, dir.c_str(), &st, &files);
  sg_scenario_free(sc);
  int code = 0;
  if (rc != SG_OK) {
    std::fprintf(stderr, "error: %s\n", sg_last_error());
    code = 1;
  } else {
    std::printf("%s: %ld grid points, %ld in C, %ld failures, min slack %.6g, max |u| %.6g, threshold %.6g\n",
                st.pass ? "pass (sampled)" : "fail", st.grid_points, st.points_in_c, st.failures, st.min_slack,
                st.max_abs_input, st.threshold);
    code = st.pass ? 0 : 2;
  }
  manifest(dir, c, "certify", code, files);
  sg_string_free(files);
  return code;
}

int margins(const Common& c) {
  sg_scenario* sc = load(c);
  if (!sc) return 1;
  char* text = nullptr;
  int pass = 0;
  const sg_status rc = sg_margins_report(sc, &text, &pass);
  sg_scenario_free(sc);
  if (rc != SG_OK) {
    std::fprintf(stderr, "error: %s\n", sg_last_error());
    return 1;
  }
  std::fputs(text, stdout);
  sg_string_free(text);
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safeguard: predictive safety filter"};
  app.require_subcommand(1);
  Common sim, cert, marg;
  auto* s = app.add_subcommand("simulate", "run a closed-loop scenario");
  add_common(s, sim, true);
  auto* ce = app.add_subcommand("certify", "grid-certify the candidate control");
  add_common(ce, cert, true);
  auto* m = app.add_subcommand("margins", "print tightening margins and the set check");
  add_common(m, marg, false);
  auto* v = app.add_subcommand("version", "print the library version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (*s) return simulate(sim);
  if (*ce) return certify(cert);
  if (*m) return margins(marg);
  if (*v) {
    std::printf("safeguard %s\n", sg_version());
    return 0;
  }
  return 1;
}
