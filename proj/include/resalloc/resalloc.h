#ifndef RESALLOC_RESALLOC_H
#define RESALLOC_RESALLOC_H

#include <stdint.h>

#if defined(RESALLOC_BUILDING)
#define RA_API __attribute__((visibility("default")))
#else
#define RA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. RA_OK is zero; the rest mirror the library error names. */
typedef enum ra_status {
  RA_OK = 0,
  RA_SCHEMA_ERROR,
  RA_INVALID_ARGUMENT,
  RA_EMPTY_ATOM_LIST,
  RA_PROBABILITY_NOT_NORMALIZED,
  RA_MISSING_ATOMS,
  RA_DEGENERATE_DENOMINATOR,
  RA_LINEAR_STAGE,
  RA_SINGULAR_MOMENTS,
  RA_NONPOSITIVE_CURVATURE,
  RA_UNBOUNDED_ABOVE,
  RA_INSTANCE_TOO_LARGE,
  RA_REGIME_CROSSING,
  RA_NO_CONVERGENCE,
  RA_TARGET_AT_MEAN,
  RA_SOLVER_FAILURE,
  RA_INTERNAL_ERROR
} ra_status;

typedef struct ra_problem ra_problem;
typedef struct ra_result ra_result;

typedef struct ra_solve_options {
  int paper_literal;
  int scenario_exact;
  int nonneg;
  double damping; /* fixed-point damping for Lagrangian calibration, (0, 1] */
} ra_solve_options;

typedef struct ra_sim_options {
  uint64_t paths;
  uint64_t seed;
  int threads; /* 0: hardware concurrency */
} ra_sim_options;

typedef struct ra_oracle_options {
  int grid;
  int line; /* nonzero: line search with exact last-period leaves */
  int nonneg;
} ra_oracle_options;

RA_API const char* ra_version(void);
RA_API const char* ra_status_name(ra_status status);
/* Message of the last failure on the calling thread. */
RA_API const char* ra_last_error(void);
/* Strings returned through char** out-parameters. */
RA_API void ra_string_free(char* s);

RA_API void ra_solve_options_default(ra_solve_options* opts);
RA_API void ra_sim_options_default(ra_sim_options* opts);
RA_API void ra_oracle_options_default(ra_oracle_options* opts);

RA_API ra_status ra_problem_from_json(const char* json, ra_problem** out);
RA_API ra_status ra_problem_load(const char* path, ra_problem** out);
RA_API void ra_problem_free(ra_problem* problem);
RA_API int ra_problem_horizon(const ra_problem* problem);
RA_API int ra_problem_n(const ra_problem* problem);

/* *pass is 1 when every period passes; text and json may be NULL. */
RA_API ra_status ra_validate(const ra_problem* problem, int* pass, char** text, char** json);

RA_API ra_status ra_solve(const ra_problem* problem, const ra_solve_options* opts, ra_result** out);
RA_API void ra_result_free(ra_result* result);
RA_API double ra_result_objective(const ra_result* result);
RA_API ra_status ra_result_json(const ra_result* result, char** json);
/* Allocation of period t (1-based) at resource x; u has room for n entries. */
RA_API ra_status ra_result_allocation(const ra_result* result, int t, double x, double* u, int n);

/* policy_json: a solve report or a bare policy document. csv may be NULL. */
RA_API ra_status ra_simulate(const ra_problem* problem, const char* policy_json, const ra_sim_options* opts,
                             char** json, char** csv);

/* VarianceConstrained: multipliers y and (a, b). Lagrangian: (a, b). */
RA_API ra_status ra_calibrate(const ra_problem* problem, const ra_solve_options* opts, char** json, char** trace_csv);

/* Chance-target reweighting with weights w and targets d of length T. */
RA_API ra_status ra_calibrate_chance(const ra_problem* problem, const double* w, const double* d, int T,
                                     const ra_solve_options* opts, char** json, char** trace_csv);

RA_API ra_status ra_compare(const ra_problem* problem, const ra_solve_options* opts, char** text, char** json);

RA_API ra_status ra_oracle(const ra_problem* problem, const ra_oracle_options* opts, char** json);

#ifdef __cplusplus
}
#endif

#endif
