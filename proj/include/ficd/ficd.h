/* Copyright (C) 2026 The ficd authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the ficd library: noise schedules, score models, energies,
 * guided sampling and the experiment runner used by the command-line tool.
 *
 * Every function returns a ficd_status. On failure the message is available
 * from ficd_last_error() on the same thread until the next failing call.
 * Objects are opaque and released with their *_destroy function; destroying
 * NULL is a no-op. Vectors and matrices are dense doubles, matrices row-major.
 */
#ifndef FICD_FICD_H_
#define FICD_FICD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FICD_BUILDING_LIBRARY)
#    define FICD_API __declspec(dllexport)
#  else
#    define FICD_API __declspec(dllimport)
#  endif
#else
#  define FICD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ficd_status {
  FICD_OK = 0,
  FICD_ERR_INVALID_ARGUMENT = 1, /* bad argument or violated precondition */
  FICD_ERR_CONFIG = 2,           /* unusable experiment configuration */
  FICD_ERR_NUMERICAL = 3,        /* a computation went non-finite */
  FICD_ERR_CHAIN_FAILURE = 4,    /* more than 1% of sampling chains failed */
  FICD_ERR_IO = 5,               /* file could not be read or written */
  FICD_ERR_INTERNAL = 6
} ficd_status;

typedef enum ficd_strategy {
  FICD_STRATEGY_EXACT = 0,
  FICD_STRATEGY_FICD = 1,
  FICD_STRATEGY_MPGD = 2,
  FICD_STRATEGY_UNIT = 3
} ficd_strategy;

typedef enum ficd_discretization {
  FICD_DISCRETIZATION_SDE_EULER = 0,
  FICD_DISCRETIZATION_DDIM = 1
} ficd_discretization;

typedef enum ficd_rho_scaling {
  FICD_RHO_CONSTANT = 0,
  FICD_RHO_BETA = 1 /* rho_t = rho * beta_t */
} ficd_rho_scaling;

typedef struct ficd_schedule ficd_schedule;
typedef struct ficd_model ficd_model;
typedef struct ficd_energy ficd_energy;
typedef struct ficd_condition ficd_condition;
typedef struct ficd_samples ficd_samples;
typedef struct ficd_experiment ficd_experiment;

FICD_API const char* ficd_version(void);
FICD_API const char* ficd_last_error(void);
FICD_API const char* ficd_status_string(ficd_status status);

/* ---- schedule ---- */

FICD_API ficd_status ficd_schedule_create_linear(int steps, double beta_min, double beta_max, ficd_schedule** out);
FICD_API ficd_status ficd_schedule_create_cosine(int steps, ficd_schedule** out);
FICD_API ficd_status ficd_schedule_create_betas(const double* betas, int steps, ficd_schedule** out);
FICD_API void ficd_schedule_destroy(ficd_schedule* schedule);
FICD_API int ficd_schedule_steps(const ficd_schedule* schedule);
/* t in 0..T; alpha_bar(0) = 1. */
FICD_API ficd_status ficd_schedule_alpha_bar(const ficd_schedule* schedule, int t, double* out);
FICD_API ficd_status ficd_schedule_beta(const ficd_schedule* schedule, int t, double* out);
FICD_API ficd_status ficd_schedule_ddim(const ficd_schedule* schedule, int t, double sigma, double* m, double* j);
FICD_API ficd_status ficd_cramer_rao_bound(const ficd_schedule* schedule, int t, double* out);
FICD_API ficd_status ficd_posterior_coefficient(ficd_strategy strategy, const ficd_schedule* schedule, int t,
                                                double* out);

/* ---- score models ---- */

/* Mixture of `components` Gaussians in R^dim. means is components x dim;
 * covariances is components blocks of dim x dim. The model copies the
 * schedule. */
FICD_API ficd_status ficd_model_create_gmm(const ficd_schedule* schedule, int dim, int components,
                                           const double* weights, const double* means,
                                           const double* covariances, ficd_model** out);
/* Loads a network file written by train-score; the model carries its own schedule. */
FICD_API ficd_status ficd_model_load(const char* path, ficd_model** out);
FICD_API void ficd_model_destroy(ficd_model* model);
FICD_API int ficd_model_dim(const ficd_model* model);
FICD_API int ficd_model_steps(const ficd_model* model);
FICD_API ficd_status ficd_model_score(const ficd_model* model, const double* x, int t, double* out);
/* dim x dim, row-major. */
FICD_API ficd_status ficd_model_jacobian(const ficd_model* model, const double* x, int t, double* out);
FICD_API ficd_status ficd_model_tweedie(const ficd_model* model, const double* x, int t, double* out);
FICD_API ficd_status ficd_model_fisher_radius(const ficd_model* model, const double* x, int t, double* out);
FICD_API ficd_status ficd_model_counts(const ficd_model* model, uint64_t* score_evals, uint64_t* jacobian_passes);
FICD_API void ficd_model_reset_counts(const ficd_model* model);

/* ---- energies and conditions ---- */

/* kind: "quadratic", "distance", "linear" or "gram" (identity reshape to one row). */
FICD_API ficd_status ficd_energy_create(const char* kind, int dim, ficd_energy** out);
FICD_API void ficd_energy_destroy(ficd_energy* energy);
FICD_API ficd_status ficd_condition_create_point(const double* y, int dim, ficd_condition** out);
/* a is m x d row-major, y has m entries. */
FICD_API ficd_status ficd_condition_create_linear(const double* a, int m, int d, const double* y,
                                                  ficd_condition** out);
/* rows x cols reference features, row-major. */
FICD_API ficd_status ficd_condition_create_features(const double* features, int rows, int cols,
                                                    ficd_condition** out);
FICD_API void ficd_condition_destroy(ficd_condition* condition);
FICD_API ficd_status ficd_energy_value(const ficd_energy* energy, const ficd_condition* condition,
                                       const double* x0, int dim, double* out);
FICD_API ficd_status ficd_energy_grad(const ficd_energy* energy, const ficd_condition* condition,
                                      const double* x0, int dim, double* out);
/* Conditional-term gradient at (x, t) for one strategy. */
FICD_API ficd_status ficd_conditional_gradient(ficd_strategy strategy, const ficd_model* model,
                                               const ficd_energy* energy, const ficd_condition* condition,
                                               const double* x, int t, double lambda, double* out);

/* ---- sampling ---- */

typedef struct ficd_sampler_options {
  int guidance; /* 0 runs the unconditional sampler */
  ficd_strategy strategy;
  double rho;
  ficd_rho_scaling rho_scaling;
  double lambda;
  ficd_discretization discretization;
  double ddim_eta;
  int time_travel_repeats;
  int time_travel_t_lo; /* 0 and 0: middle third */
  int time_travel_t_hi;
  int n_chains;
  uint64_t seed;
  int threads;
  int final_step_noise;
  int reuse_score;
  int trace_fisher;
} ficd_sampler_options;

FICD_API void ficd_sampler_options_default(ficd_sampler_options* options);

/* energy and condition may be NULL when options->guidance is 0. */
FICD_API ficd_status ficd_sample(const ficd_model* model, const ficd_energy* energy, const ficd_condition* condition,
                                 const ficd_sampler_options* options, ficd_samples** out);
FICD_API void ficd_samples_destroy(ficd_samples* samples);
FICD_API int ficd_samples_count(const ficd_samples* samples);
FICD_API int ficd_samples_dim(const ficd_samples* samples);
/* n_chains x dim, row-major; rows of failed chains are zero. */
FICD_API const double* ficd_samples_data(const ficd_samples* samples);
/* Number of failed chains, and whether chain i failed. */
FICD_API int ficd_samples_failed(const ficd_samples* samples);
FICD_API int ficd_samples_chain_failed(const ficd_samples* samples, int chain);
FICD_API int ficd_samples_trace_length(const ficd_samples* samples);
/* Fills t, grad_norm, fisher_spectral_radius, cr_bound, coefficient_used,
 * step_wall_time_s, score_evals, jacobian_passes (8 values). */
FICD_API ficd_status ficd_samples_trace_row(const ficd_samples* samples, int row, double* out8);
FICD_API ficd_status ficd_samples_write_csv(const ficd_samples* samples, const char* path);
FICD_API ficd_status ficd_sliced_wasserstein(const double* a, int na, const double* b, int nb, int dim,
                                             int projections, uint64_t seed, double* out);

/* ---- experiments (what the CLI runs) ---- */

FICD_API ficd_status ficd_experiment_create(ficd_experiment** out);
FICD_API void ficd_experiment_destroy(ficd_experiment* experiment);
FICD_API ficd_status ficd_experiment_apply_preset(ficd_experiment* experiment, const char* name);
FICD_API ficd_status ficd_experiment_apply_file(ficd_experiment* experiment, const char* path);
FICD_API ficd_status ficd_experiment_set(ficd_experiment* experiment, const char* key, const char* value);
/* Current value of a key, or NULL when unset. Valid until the next change. */
FICD_API const char* ficd_experiment_get(const ficd_experiment* experiment, const char* key);
/* command: train-score, sample, verify, trace or bench. exit_code follows the
 * CLI contract (0 ok, 1 assertion failure, 2 configuration error, 3 runtime
 * failure); the status is FICD_OK whenever the command ran to a verdict. */
FICD_API ficd_status ficd_experiment_run(ficd_experiment* experiment, const char* command, int* exit_code);
/* Text report of the last run. */
FICD_API const char* ficd_experiment_report(const ficd_experiment* experiment);

FICD_API int ficd_preset_count(void);
FICD_API const char* ficd_preset_name(int index);
FICD_API const char* ficd_preset_text(int index);

#ifdef __cplusplus
}
#endif

#endif /* FICD_FICD_H_ */
