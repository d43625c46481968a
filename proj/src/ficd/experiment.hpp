// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ficd/analytics.hpp"
#include "ficd/guidance.hpp"
#include "ficd/kv.hpp"
#include "ficd/mlp.hpp"
#include "ficd/sampler.hpp"
#include "ficd/schedule.hpp"
#include "ficd/score_model.hpp"

namespace ficd {

struct Preset {
  std::string name;
  std::string text;
};

/// Presets compiled in from presets/*.cfg.
const std::vector<Preset>& builtin_presets();
const Preset* find_preset(const std::string& name);

/// Experiment settings as dotted keys. Layers are merged in order
/// defaults < preset < file < overrides, so later layers win.
///
/// Key reference (defaults in brackets):
///   seed [0]                      root seed; every stream derives from it
///   schedule.kind [linear] .T [1000] .beta_min [1e-4] .beta_max [0.02]
///   model.kind                    gmm | learned | train
///   model.weights .means .variances | .cov.<i>       (gmm)
///   model.path                    network file (learned)
///   data.kind [model]             model | gmm | csv  (training data)
///   data.path, data.weights .means .variances, data.samples [4096]
///   train.steps [2000] .batch [128] .learning_rate [1e-3] .momentum [0.9]
///   train.hidden [128,128,128] .time_embed [16]
///   energy.kind                   quadratic | distance | linear | gram
///   energy.feature_rows [1], energy.feature_map (matrix, gram only)
///   condition.kind [point] .y .A .features
///   sampler.strategy [ficd]       ficd | exact | mpgd | unit | uncond
///   sampler.rho [1]               scalar or T values; sampler.rho.<strategy> overrides
///   sampler.rho_scaling [constant] constant | beta
///   sampler.lambda [1] .discretization [sde_euler] .ddim_eta [0]
///   sampler.time_travel.repeats [0] .t_lo [0] .t_hi [0]
///   sampler.n_chains [1000] .threads [1] .final_step_noise [false]
///   sampler.reuse_score [true] .trace_fisher [false]
///   oracle.lambda [sampler.lambda] .samples [sampler.n_chains] .projections [64]
///   bench.reps [20] .strategies [ficd,exact]
///   output.dir [ficd-out]
///   verify.suites [all]
class ExperimentConfig {
 public:
  ExperimentConfig();

  void apply_preset(const std::string& name);
  void apply_file(const std::string& path);
  void apply_text(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);

  const KeyValues& values() const { return kv_; }

  std::uint64_t seed() const;
  NoiseSchedule schedule() const;
  /// The score model described by model.*; `train` kind trains one now.
  std::unique_ptr<ScoreModel> model(const NoiseSchedule& schedule) const;
  GaussianMixture model_mixture() const;
  std::unique_ptr<EnergyFunction> energy(int dim) const;
  Condition condition() const;
  /// Sampler settings for the configured strategy, or for `strategy` when
  /// given ("uncond" turns guidance off).
  SamplerConfig sampler(const std::optional<std::string>& strategy = std::nullopt) const;
  MlpSpec mlp_spec(int dim) const;
  TrainOptions train_options() const;
  /// d x n training points per data.*.
  Matrix training_data() const;
  /// The mixture the training data is drawn from, if it is one.
  std::optional<GaussianMixture> data_mixture() const;
  std::string output_dir() const;
  std::vector<std::string> suites() const;

 private:
  KeyValues kv_;
};

/// What a command printed and how it ended: 0 ok, 1 assertion failure,
/// 2 configuration error, 3 runtime chain failure.
struct CommandOutcome {
  int exit_code = 0;
  std::string report;
};

CommandOutcome cmd_train_score(const ExperimentConfig& config);
CommandOutcome cmd_sample(const ExperimentConfig& config);
CommandOutcome cmd_verify(const ExperimentConfig& config);
CommandOutcome cmd_trace(const ExperimentConfig& config);
CommandOutcome cmd_bench(const ExperimentConfig& config);

/// Runs one of the commands above by name and maps exceptions to exit codes.
CommandOutcome run_command(const std::string& command, const ExperimentConfig& config);

/// Exit code for an exception thrown by the library.
int exit_code_for(const std::exception& e);

}  // namespace ficd
