// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "ficd/common.hpp"
#include "ficd/guidance.hpp"
#include "ficd/posterior.hpp"
#include "ficd/random.hpp"
#include "ficd/score_model.hpp"
#include "ficd/trace.hpp"

namespace ficd {

enum class Discretization { kSdeEuler, kDdim };
std::string_view to_string(Discretization d);
Discretization parse_discretization(std::string_view text);

/// rho_t = rho[t] (constant) or rho[t] * beta_t (beta).
enum class RhoScaling { kConstant, kBeta };
std::string_view to_string(RhoScaling s);
RhoScaling parse_rho_scaling(std::string_view text);

struct TimeTravel {
  int repeats = 0;
  /// Active window [t_lo, t_hi]; 0 in both means the middle third of 1..T.
  int t_lo = 0;
  int t_hi = 0;
};

/// Chains per work unit. Blocks are the unit of parallelism, so results do
/// not depend on the thread count.
inline constexpr int kChainBlock = 64;

struct SamplerConfig {
  /// false runs the unconditional sampler (no energy evaluations at all).
  bool guidance = true;
  Strategy strategy = Strategy::kFicd;
  /// One entry (constant over t) or T entries, rho[0] belonging to t = 1.
  std::vector<double> rho{1.0};
  RhoScaling rho_scaling = RhoScaling::kConstant;
  double lambda = 1.0;
  Discretization discretization = Discretization::kSdeEuler;
  double ddim_eta = 0.0;
  TimeTravel time_travel;
  int n_chains = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Add sqrt(beta_1) noise on the last step. Off returns a clean x0.
  bool final_step_noise = false;
  /// false evaluates the score a second time for the unconditional part,
  /// as a literal reading of the algorithm does.
  bool reuse_score = true;
  /// Record the mean spectral radius of the score Jacobian per step.
  bool trace_fisher = false;

  void validate(int steps) const;
  double rho_at(const NoiseSchedule& schedule, int t) const;
  /// Resolved window; empty (lo > hi) when time travel is off.
  std::pair<int, int> travel_window(int steps) const;
  int repeats_at(int steps, int t) const;
};

// Single-chain steps. Noise is supplied by the caller.

/// (1 + beta/2) x + beta s + sqrt(beta) noise.
Vector unconditional_step(const ScoreModel& model, const Vector& x, int t, const Vector& noise);

/// unconditional_step - rho * (2/sqrt(ab_t)) lambda grad e(x0_hat); one score
/// evaluation and one energy gradient.
Vector ficd_step(const ScoreModel& model, const EnergyFunction& energy, const Vector& x, int t,
                 const Condition& c, double rho, double lambda, const Vector& noise);

Vector guided_step(Strategy strategy, const ScoreModel& model, const EnergyFunction& energy,
                   const Vector& x, int t, const Condition& c, double rho, double lambda,
                   const Vector& noise);

/// sqrt(ab_{t-1}) x0_hat + sqrt(1 - ab_{t-1} - sigma^2) eps + sigma noise,
/// eps = -sqrt(1 - ab_t) s.
Vector ddim_step(const ScoreModel& model, const Vector& x, int t, double sigma, const Vector& noise);

/// x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) noise.
Vector renoise(const NoiseSchedule& schedule, const Vector& x_prev, int t, const Vector& noise);

/// Steps t -> t-1, then `repeats` times re-noises back to t and steps again.
/// step(x) performs one t -> t-1 transition; it is called repeats + 1 times.
Vector time_travel_wrap(const std::function<Vector(const Vector&)>& step, const NoiseSchedule& schedule,
                        const Vector& x, int t, int repeats, NoiseStream& rng);

struct SampleResult {
  Matrix samples;             // n_chains x d
  std::vector<char> failed;   // per chain, 1 if it went non-finite
  std::vector<int> failed_at; // step at which each failed chain stopped (0 if alive)
  RunTrace trace;
  double wall_time_s = 0.0;
  EvalCounts counts;          // score model work done by this run

  int failed_count() const;
  /// Rows of the chains that finished.
  Matrix valid_samples() const;
};

/// Runs every chain from x_T ~ N(0, I) down to x_0. energy and c may be null
/// when config.guidance is false. Throws ChainFailure if more than 1% of the
/// chains go non-finite.
SampleResult sample(const SamplerConfig& config, const ScoreModel& model, const EnergyFunction* energy,
                    const Condition* c);

}  // namespace ficd
