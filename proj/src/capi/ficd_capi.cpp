// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/ficd.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "ficd/analytics.hpp"
#include "ficd/experiment.hpp"
#include "ficd/guidance.hpp"
#include "ficd/mlp.hpp"
#include "ficd/posterior.hpp"
#include "ficd/sampler.hpp"
#include "ficd/schedule.hpp"
#include "ficd/score_model.hpp"
#include "ficd/serialize.hpp"

struct ficd_schedule {
  ficd::NoiseSchedule s;
};
struct ficd_model {
  std::unique_ptr<ficd::ScoreModel> m;
};
struct ficd_energy {
  std::unique_ptr<ficd::EnergyFunction> e;
};
struct ficd_condition {
  ficd::Condition c;
};
struct ficd_samples {
  ficd::SampleResult r;
  std::vector<double> row_major;
};
struct ficd_experiment {
  ficd::ExperimentConfig config;
  std::string report;
  std::string scratch;
};

namespace {

thread_local std::string g_last_error;

ficd_status fail(ficd_status status, const char* what) {
  g_last_error = what;
  return status;
}

// Runs fn and converts library exceptions into status codes.
template <class Fn>
ficd_status guarded(Fn&& fn) {
  try {
    fn();
    return FICD_OK;
  } catch (const ficd::InvalidArgument& e) {
    return fail(FICD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const ficd::ConfigError& e) {
    return fail(FICD_ERR_CONFIG, e.what());
  } catch (const ficd::NumericalError& e) {
    return fail(FICD_ERR_NUMERICAL, e.what());
  } catch (const ficd::ChainFailure& e) {
    return fail(FICD_ERR_CHAIN_FAILURE, e.what());
  } catch (const ficd::IoError& e) {
    return fail(FICD_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FICD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FICD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FICD_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) throw ficd::InvalidArgument(std::string(name) + " is NULL");
}

ficd::Strategy to_strategy(ficd_strategy s) {
  switch (s) {
    case FICD_STRATEGY_EXACT: return ficd::Strategy::kExact;
    case FICD_STRATEGY_FICD: return ficd::Strategy::kFicd;
    case FICD_STRATEGY_MPGD: return ficd::Strategy::kMpgd;
    case FICD_STRATEGY_UNIT: return ficd::Strategy::kUnit;
  }
  throw ficd::InvalidArgument("unknown strategy " + std::to_string(static_cast<int>(s)));
}

ficd::Vector vec(const double* p, int n) {
  need(p, "vector");
  if (n <= 0) throw ficd::InvalidArgument("dimension must be positive");
  return Eigen::Map<const ficd::Vector>(p, n);
}

ficd::Matrix row_major(const double* p, int rows, int cols) {
  need(p, "matrix");
  if (rows <= 0 || cols <= 0) throw ficd::InvalidArgument("matrix shape must be positive");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(p, rows, cols);
}

void store(const ficd::Vector& v, double* out) { std::memcpy(out, v.data(), sizeof(double) * v.size()); }

void store_row_major(const ficd::Matrix& m, double* out) {
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, m.rows(), m.cols()) = m;
}

}  // namespace

extern "C" {

const char* ficd_version(void) { return "0.1.0"; }

const char* ficd_last_error(void) { return g_last_error.c_str(); }

const char* ficd_status_string(ficd_status status) {
  switch (status) {
    case FICD_OK: return "ok";
    case FICD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FICD_ERR_CONFIG: return "configuration error";
    case FICD_ERR_NUMERICAL: return "numerical error";
    case FICD_ERR_CHAIN_FAILURE: return "chain failure";
    case FICD_ERR_IO: return "i/o error";
    case FICD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- schedule

ficd_status ficd_schedule_create_linear(int steps, double beta_min, double beta_max, ficd_schedule** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_schedule{ficd::NoiseSchedule::linear(steps, beta_min, beta_max)};
  });
}

ficd_status ficd_schedule_create_cosine(int steps, ficd_schedule** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_schedule{ficd::NoiseSchedule::cosine(steps)};
  });
}

ficd_status ficd_schedule_create_betas(const double* betas, int steps, ficd_schedule** out) {
  return guarded([&] {
    need(out, "out");
    need(betas, "betas");
    if (steps <= 0) throw ficd::InvalidArgument("steps must be positive");
    *out = new ficd_schedule{ficd::NoiseSchedule::from_betas(std::vector<double>(betas, betas + steps))};
  });
}

void ficd_schedule_destroy(ficd_schedule* schedule) { delete schedule; }

int ficd_schedule_steps(const ficd_schedule* schedule) { return schedule ? schedule->s.steps() : 0; }

ficd_status ficd_schedule_alpha_bar(const ficd_schedule* schedule, int t, double* out) {
  return guarded([&] {
    need(schedule, "schedule");
    need(out, "out");
    *out = schedule->s.alpha_bar(t);
  });
}

ficd_status ficd_schedule_beta(const ficd_schedule* schedule, int t, double* out) {
  return guarded([&] {
    need(schedule, "schedule");
    need(out, "out");
    *out = schedule->s.beta(t);
  });
}

ficd_status ficd_schedule_ddim(const ficd_schedule* schedule, int t, double sigma, double* m, double* j) {
  return guarded([&] {
    need(schedule, "schedule");
    need(m, "m");
    need(j, "j");
    const ficd::DdimCoefficients c = ficd::ddim_coefficients(schedule->s, t, sigma);
    *m = c.m;
    *j = c.j;
  });
}

ficd_status ficd_cramer_rao_bound(const ficd_schedule* schedule, int t, double* out) {
  return guarded([&] {
    need(schedule, "schedule");
    need(out, "out");
    *out = ficd::cramer_rao_bound(schedule->s, t);
  });
}

ficd_status ficd_posterior_coefficient(ficd_strategy strategy, const ficd_schedule* schedule, int t, double* out) {
  return guarded([&] {
    need(schedule, "schedule");
    need(out, "out");
    *out = ficd::posterior_coefficient(to_strategy(strategy), schedule->s, t);
  });
}

// ---- models

ficd_status ficd_model_create_gmm(const ficd_schedule* schedule, int dim, int components, const double* weights,
                                  const double* means, const double* covariances, ficd_model** out) {
  return guarded([&] {
    need(schedule, "schedule");
    need(out, "out");
    need(weights, "weights");
    need(means, "means");
    need(covariances, "covariances");
    if (dim <= 0 || components <= 0) throw ficd::InvalidArgument("dim and components must be positive");
    ficd::GaussianMixture gmm;
    for (int i = 0; i < components; ++i) {
      gmm.weights.push_back(weights[i]);
      gmm.means.push_back(vec(means + static_cast<std::ptrdiff_t>(i) * dim, dim));
      gmm.covariances.push_back(row_major(covariances + static_cast<std::ptrdiff_t>(i) * dim * dim, dim, dim));
    }
    gmm.validate();
    *out = new ficd_model{std::make_unique<ficd::GmmScoreModel>(std::move(gmm), schedule->s)};
  });
}

ficd_status ficd_model_load(const char* path, ficd_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    if (!in) throw ficd::IoError(std::string("cannot open ") + path);
    *out = new ficd_model{ficd::LearnedScoreModel::read(in)};
  });
}

void ficd_model_destroy(ficd_model* model) { delete model; }

int ficd_model_dim(const ficd_model* model) { return model ? model->m->dim() : 0; }

int ficd_model_steps(const ficd_model* model) { return model ? model->m->schedule().steps() : 0; }

ficd_status ficd_model_score(const ficd_model* model, const double* x, int t, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    store(model->m->score(vec(x, model->m->dim()), t), out);
  });
}

ficd_status ficd_model_jacobian(const ficd_model* model, const double* x, int t, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    store_row_major(model->m->jacobian(vec(x, model->m->dim()), t), out);
  });
}

ficd_status ficd_model_tweedie(const ficd_model* model, const double* x, int t, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    store(ficd::tweedie_posterior_mean(*model->m, vec(x, model->m->dim()), t), out);
  });
}

ficd_status ficd_model_fisher_radius(const ficd_model* model, const double* x, int t, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = ficd::fisher_information(*model->m, vec(x, model->m->dim()), t).spectral_radius;
  });
}

ficd_status ficd_model_counts(const ficd_model* model, uint64_t* score_evals, uint64_t* jacobian_passes) {
  return guarded([&] {
    need(model, "model");
    const ficd::EvalCounts c = model->m->counts();
    if (score_evals) *score_evals = c.score_evals;
    if (jacobian_passes) *jacobian_passes = c.jacobian_passes;
  });
}

void ficd_model_reset_counts(const ficd_model* model) {
  if (model) model->m->reset_counts();
}

// ---- energies and conditions

ficd_status ficd_energy_create(const char* kind, int dim, ficd_energy** out) {
  return guarded([&] {
    need(kind, "kind");
    need(out, "out");
    *out = new ficd_energy{ficd::make_energy(kind, dim)};
  });
}

void ficd_energy_destroy(ficd_energy* energy) { delete energy; }

ficd_status ficd_condition_create_point(const double* y, int dim, ficd_condition** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_condition{ficd::Condition::point(vec(y, dim))};
  });
}

ficd_status ficd_condition_create_linear(const double* a, int m, int d, const double* y, ficd_condition** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_condition{ficd::Condition::linear(row_major(a, m, d), vec(y, m))};
  });
}

ficd_status ficd_condition_create_features(const double* features, int rows, int cols, ficd_condition** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_condition{ficd::Condition::reference_features(row_major(features, rows, cols))};
  });
}

void ficd_condition_destroy(ficd_condition* condition) { delete condition; }

ficd_status ficd_energy_value(const ficd_energy* energy, const ficd_condition* condition, const double* x0, int dim,
                              double* out) {
  return guarded([&] {
    need(energy, "energy");
    need(condition, "condition");
    need(out, "out");
    energy->e->check(condition->c, dim);
    *out = energy->e->value(vec(x0, dim), condition->c);
  });
}

ficd_status ficd_energy_grad(const ficd_energy* energy, const ficd_condition* condition, const double* x0, int dim,
                             double* out) {
  return guarded([&] {
    need(energy, "energy");
    need(condition, "condition");
    need(out, "out");
    energy->e->check(condition->c, dim);
    store(energy->e->grad(vec(x0, dim), condition->c), out);
  });
}

ficd_status ficd_conditional_gradient(ficd_strategy strategy, const ficd_model* model, const ficd_energy* energy,
                                      const ficd_condition* condition, const double* x, int t, double lambda,
                                      double* out) {
  return guarded([&] {
    need(model, "model");
    need(energy, "energy");
    need(condition, "condition");
    need(out, "out");
    const int d = model->m->dim();
    energy->e->check(condition->c, d);
    store(ficd::conditional_term_gradient(to_strategy(strategy), *model->m, *energy->e, vec(x, d), t, condition->c,
                                          lambda),
          out);
  });
}

// ---- sampling

void ficd_sampler_options_default(ficd_sampler_options* options) {
  if (!options) return;
  const ficd::SamplerConfig d;
  *options = ficd_sampler_options{};
  options->guidance = d.guidance ? 1 : 0;
  options->strategy = FICD_STRATEGY_FICD;
  options->rho = d.rho.front();
  options->rho_scaling = FICD_RHO_CONSTANT;
  options->lambda = d.lambda;
  options->discretization = FICD_DISCRETIZATION_SDE_EULER;
  options->ddim_eta = d.ddim_eta;
  options->time_travel_repeats = d.time_travel.repeats;
  options->time_travel_t_lo = d.time_travel.t_lo;
  options->time_travel_t_hi = d.time_travel.t_hi;
  options->n_chains = d.n_chains;
  options->seed = d.seed;
  options->threads = d.threads;
  options->final_step_noise = d.final_step_noise ? 1 : 0;
  options->reuse_score = d.reuse_score ? 1 : 0;
  options->trace_fisher = d.trace_fisher ? 1 : 0;
}

ficd_status ficd_sample(const ficd_model* model, const ficd_energy* energy, const ficd_condition* condition,
                        const ficd_sampler_options* options, ficd_samples** out) {
  return guarded([&] {
    need(model, "model");
    need(options, "options");
    need(out, "out");
    ficd::SamplerConfig c;
    c.guidance = options->guidance != 0;
    c.strategy = to_strategy(options->strategy);
    c.rho = {options->rho};
    c.rho_scaling = options->rho_scaling == FICD_RHO_BETA ? ficd::RhoScaling::kBeta : ficd::RhoScaling::kConstant;
    c.lambda = options->lambda;
    c.discretization = options->discretization == FICD_DISCRETIZATION_DDIM ? ficd::Discretization::kDdim
                                                                          : ficd::Discretization::kSdeEuler;
    c.ddim_eta = options->ddim_eta;
    c.time_travel = {options->time_travel_repeats, options->time_travel_t_lo, options->time_travel_t_hi};
    c.n_chains = options->n_chains;
    c.seed = options->seed;
    c.threads = options->threads;
    c.final_step_noise = options->final_step_noise != 0;
    c.reuse_score = options->reuse_score != 0;
    c.trace_fisher = options->trace_fisher != 0;
    if (c.guidance) {
      need(energy, "energy");
      need(condition, "condition");
    }
    auto s = std::make_unique<ficd_samples>();
    s->r = ficd::sample(c, *model->m, c.guidance ? energy->e.get() : nullptr,
                        c.guidance ? &condition->c : nullptr);
    s->row_major.resize(static_cast<std::size_t>(s->r.samples.size()));
    store_row_major(s->r.samples, s->row_major.data());
    *out = s.release();
  });
}

void ficd_samples_destroy(ficd_samples* samples) { delete samples; }

int ficd_samples_count(const ficd_samples* samples) {
  return samples ? static_cast<int>(samples->r.samples.rows()) : 0;
}

int ficd_samples_dim(const ficd_samples* samples) {
  return samples ? static_cast<int>(samples->r.samples.cols()) : 0;
}

const double* ficd_samples_data(const ficd_samples* samples) {
  return samples ? samples->row_major.data() : nullptr;
}

int ficd_samples_failed(const ficd_samples* samples) { return samples ? samples->r.failed_count() : 0; }

int ficd_samples_chain_failed(const ficd_samples* samples, int chain) {
  if (!samples || chain < 0 || chain >= static_cast<int>(samples->r.failed.size())) return 0;
  return samples->r.failed[static_cast<std::size_t>(chain)] ? 1 : 0;
}

int ficd_samples_trace_length(const ficd_samples* samples) {
  return samples ? static_cast<int>(samples->r.trace.rows.size()) : 0;
}

ficd_status ficd_samples_trace_row(const ficd_samples* samples, int row, double* out8) {
  return guarded([&] {
    need(samples, "samples");
    need(out8, "out");
    if (row < 0 || row >= static_cast<int>(samples->r.trace.rows.size())) {
      throw ficd::InvalidArgument("trace row " + std::to_string(row) + " out of range");
    }
    const ficd::TraceRow& r = samples->r.trace.rows[static_cast<std::size_t>(row)];
    const double v[8] = {static_cast<double>(r.t), r.grad_norm, r.fisher_spectral_radius, r.cr_bound,
                         r.coefficient_used, r.step_wall_time_s, r.score_evals, r.jacobian_passes};
    std::memcpy(out8, v, sizeof v);
  });
}

ficd_status ficd_samples_write_csv(const ficd_samples* samples, const char* path) {
  return guarded([&] {
    need(samples, "samples");
    need(path, "path");
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(samples->r.failed.size()); ++i) {
      if (!samples->r.failed[static_cast<std::size_t>(i)]) ids.push_back(i);
    }
    std::ofstream out(path);
    if (!out) throw ficd::IoError(std::string("cannot write ") + path);
    ficd::write_samples_csv(out, samples->r.samples, ids);
    if (!out) throw ficd::IoError(std::string("write failed: ") + path);
  });
}

ficd_status ficd_sliced_wasserstein(const double* a, int na, const double* b, int nb, int dim, int projections,
                                    uint64_t seed, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = ficd::sliced_wasserstein(row_major(a, na, dim), row_major(b, nb, dim), projections, seed);
  });
}

// ---- experiments

ficd_status ficd_experiment_create(ficd_experiment** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ficd_experiment{};
  });
}

void ficd_experiment_destroy(ficd_experiment* experiment) { delete experiment; }

ficd_status ficd_experiment_apply_preset(ficd_experiment* experiment, const char* name) {
  return guarded([&] {
    need(experiment, "experiment");
    need(name, "name");
    experiment->config.apply_preset(name);
  });
}

ficd_status ficd_experiment_apply_file(ficd_experiment* experiment, const char* path) {
  return guarded([&] {
    need(experiment, "experiment");
    need(path, "path");
    experiment->config.apply_file(path);
  });
}

ficd_status ficd_experiment_set(ficd_experiment* experiment, const char* key, const char* value) {
  return guarded([&] {
    need(experiment, "experiment");
    need(key, "key");
    need(value, "value");
    experiment->config.set(key, value);
  });
}

const char* ficd_experiment_get(const ficd_experiment* experiment, const char* key) {
  if (!experiment || !key) return nullptr;
  auto v = experiment->config.values().find(key);
  if (!v) return nullptr;
  auto* self = const_cast<ficd_experiment*>(experiment);
  self->scratch = *v;
  return self->scratch.c_str();
}

ficd_status ficd_experiment_run(ficd_experiment* experiment, const char* command, int* exit_code) {
  return guarded([&] {
    need(experiment, "experiment");
    need(command, "command");
    need(exit_code, "exit_code");
    ficd::CommandOutcome r = ficd::run_command(command, experiment->config);
    experiment->report = std::move(r.report);
    *exit_code = r.exit_code;
  });
}

const char* ficd_experiment_report(const ficd_experiment* experiment) {
  return experiment ? experiment->report.c_str() : "";
}

int ficd_preset_count(void) { return static_cast<int>(ficd::builtin_presets().size()); }

const char* ficd_preset_name(int index) {
  const auto& p = ficd::builtin_presets();
  return index >= 0 && index < static_cast<int>(p.size()) ? p[static_cast<std::size_t>(index)].name.c_str() : nullptr;
}

const char* ficd_preset_text(int index) {
  const auto& p = ficd::builtin_presets();
  return index >= 0 && index < static_cast<int>(p.size()) ? p[static_cast<std::size_t>(index)].text.c_str() : nullptr;
}

}  // extern "C"
