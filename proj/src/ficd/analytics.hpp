// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ficd/common.hpp"
#include "ficd/guidance.hpp"
#include "ficd/sampler.hpp"
#include "ficd/score_model.hpp"
#include "ficd/trace.hpp"

namespace ficd {

struct GaussianPosterior {
  Vector mean;
  Matrix covariance;
};

/// Conjugate posterior of x ~ N(mu0, sigma0) given y = A x + N(0, noise_var I).
GaussianPosterior linear_gaussian_posterior(const Vector& mu0, const Matrix& sigma0, const Matrix& a,
                                            const Vector& y, double noise_var);

/// p(x) exp(-lambda |x - c|^2) / Z for a Gaussian mixture p, again a mixture.
GaussianMixture tilted_gmm_oracle(const GaussianMixture& gmm, const Vector& c, double lambda);

/// n x d draws, deterministic in seed.
Matrix sample_gmm(const GaussianMixture& gmm, int n, std::uint64_t seed);

/// 1-d Wasserstein-1 distance between two empirical distributions.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Mean 1-d W1 over random unit projections; rows are samples.
double sliced_wasserstein(const Matrix& a, const Matrix& b, int n_projections, std::uint64_t seed);

struct BoundSample {
  int t = 0;
  int point = 0;  // index into the grid
  double spectral_radius = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

struct BoundReport {
  std::vector<BoundSample> samples;
  int violations = 0;
  double max_ratio = 0.0;
  double violation_rate() const;
};

/// Spectral radius of the score Jacobian against 1/(1 - ab_t) at every
/// (grid row, t). Records; asserting is up to the caller.
BoundReport bound_verification(const ScoreModel& model, const Matrix& x_grid, const std::vector<int>& t_set);

struct PhaseProfile {
  double early = 0.0;  // largest t
  double mid = 0.0;
  double late = 0.0;
};

/// Mean grad_norm per tercile of the distinct timesteps in the trace, the
/// i-th largest of n timesteps falling in tercile floor(3 i / n).
PhaseProfile phase_profile(const RunTrace& trace);

struct DeviationStep {
  int t = 0;
  double max_deviation = 0.0;  // over chains
  double bound = 0.0;          // rho kappa (2 sqrt(ab_{t-1}) - sqrt(ab_t)) / sqrt(ab_t)
  double exact_bound = 0.0;    // deviation_bound_tight with rho lambda in place of rho
  bool pass = false;           // max_deviation < bound
};

struct DeviationReport {
  std::vector<DeviationStep> steps;
  bool all_pass() const;
  std::vector<int> failing_steps() const;
};

/// rho kappa (2 sqrt(ab_{t-1}) - sqrt(ab_t)) / sqrt(ab_t).
double deviation_bound(double rho, double kappa, double alpha_bar, double alpha_bar_prev);
/// rho kappa (2 / sqrt(ab_t) - sqrt(ab_{t-1})): the FICD and MPGD coefficients
/// differ by exactly this much, so it is attained by unit-norm gradients.
double deviation_bound_tight(double rho, double kappa, double alpha_bar, double alpha_bar_prev);

struct DeviationSetup {
  double rho = 0.5;
  double lambda = 1.0;
  double kappa = 1.0;
  int n_chains = 64;
  std::uint64_t seed = 0;
};

/// Steps FICD and MPGD from the same states with the same noise at every t
/// (the shared trajectory follows FICD) and compares the one-step outputs.
DeviationReport deviation_bound_check(const ScoreModel& model, const EnergyFunction& energy,
                                      const Condition& c, const DeviationSetup& setup);

struct BenchRow {
  std::string strategy;
  double median_run_s = 0.0;
  double median_step_s = 0.0;
  double min_run_s = 0.0;
  double max_run_s = 0.0;
  int reps = 0;
  double score_evals_per_step = 0.0;      // per chain
  double jacobian_passes_per_step = 0.0;  // per chain
};

/// Times full sampling runs per strategy: one discarded warm-up, then the
/// median over `reps` runs. Counts come from the model's counters.
std::vector<BenchRow> benchmark_steps(const ScoreModel& model, const std::vector<Strategy>& strategies,
                                      const EnergyFunction& energy, const Condition& c,
                                      const SamplerConfig& base, int reps);

double median(std::vector<double> values);

}  // namespace ficd
