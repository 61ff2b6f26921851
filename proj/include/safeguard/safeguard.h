#ifndef SAFEGUARD_SAFEGUARD_H
#define SAFEGUARD_SAFEGUARD_H

#include <stddef.h>

#if defined(SAFEGUARD_BUILDING_LIBRARY)
#define SG_API __attribute__((visibility("default")))
#else
#define SG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sg_status {
  SG_OK = 0,
  SG_ERR_INVALID_ARGUMENT = 1,
  SG_ERR_IO = 2,
  SG_ERR_CONFIG = 3,
  SG_ERR_NUMERIC = 4,
  SG_ERR_INFEASIBLE = 5,
  SG_ERR_INTERNAL = 6
} sg_status;

typedef struct sg_scenario sg_scenario;
typedef struct sg_filter sg_filter;

/* Where the applied input came from. */
typedef enum sg_source {
  SG_SOURCE_NOMINAL = 0,
  SG_SOURCE_NLP = 1,
  SG_SOURCE_SHIFTED = 2,
  SG_SOURCE_FAULT_HOLD = 3
} sg_source;

typedef struct sg_run_stats {
  long runs;         /* 1, or the number of ensemble seeds */
  long steps;
  long violations;   /* summed over runs */
  long faults;
  long errors;       /* runs that ended on a numeric error */
  double min_slack;  /* over all runs and constraints */
  double trigger_fraction;  /* mean over runs */
  double total_solve_ms;
} sg_run_stats;

typedef struct sg_cert_stats {
  int pass;
  long grid_points;
  long points_in_c;
  long failures;
  double min_slack;
  double max_abs_input;
  double threshold;
} sg_cert_stats;

typedef struct sg_step_info {
  int triggered;
  sg_source source;
  double solve_ms;
  double h;
} sg_step_info;

/* Nominal policy: write m inputs to u for state x (n entries) at time k.
   Return nonzero to signal failure. */
typedef int (*sg_policy_fn)(const double* x, size_t n, long k, double* u, size_t m, void* user);

SG_API const char* sg_version(void);

/* Message of the last failed call on this thread; never NULL. */
SG_API const char* sg_last_error(void);

SG_API void sg_string_free(char* s);

/* overrides: "section.key=value" strings, may be NULL when n_overrides is 0. */
SG_API sg_status sg_scenario_load(const char* path, const char* const* overrides, size_t n_overrides,
                                  sg_scenario** out);
SG_API sg_status sg_scenario_parse(const char* text, const char* const* overrides, size_t n_overrides,
                                   sg_scenario** out);
SG_API void sg_scenario_free(sg_scenario* scenario);
SG_API sg_status sg_scenario_dims(const sg_scenario* scenario, size_t* n_states, size_t* n_inputs);
/* Canonical text of the resolved configuration; free with sg_string_free. */
SG_API sg_status sg_scenario_serialize(const sg_scenario* scenario, char** text);

/* Runs the closed loop (or the seed ensemble) and writes its files under out_dir.
   artifacts, when not NULL, receives a newline-separated file list. */
SG_API sg_status sg_simulate(const sg_scenario* scenario, const char* out_dir, sg_run_stats* stats,
                             char** artifacts);

/* Grid certification of the plant's candidate control; writes certificate.json. */
SG_API sg_status sg_certify(const sg_scenario* scenario, const char* out_dir, sg_cert_stats* stats,
                            char** artifacts);

/* Human-readable margin table followed by the set-check report as JSON.
   assumption_pass may be NULL. */
SG_API sg_status sg_margins_report(const sg_scenario* scenario, char** text, int* assumption_pass);

SG_API sg_status sg_write_manifest(const char* out_dir, const char* config_path, const char* command,
                                   int exit_status, const char* artifacts);

SG_API double sg_stage_margin(double lb_x, double ld, double lf_x, int l);
SG_API double sg_terminal_margin(double lh_x, double ld, double lf_x, int n);
SG_API double sg_boundary_layer(double lh_x, double lf_step, double ld, double lh_k);

/* A filter wrapping the scenario's plant. With policy NULL the configured
   nominal policy is used. */
SG_API sg_status sg_filter_create(const sg_scenario* scenario, sg_policy_fn policy, void* user,
                                  sg_filter** out);
SG_API sg_status sg_filter_step(sg_filter* filter, const double* x, long k, double* u, sg_step_info* info);
SG_API void sg_filter_reset(sg_filter* filter);
SG_API void sg_filter_free(sg_filter* filter);

#ifdef __cplusplus
}
#endif

#endif
