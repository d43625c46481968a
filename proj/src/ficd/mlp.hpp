// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "ficd/score_model.hpp"

namespace ficd {

/// Shape of the epsilon-prediction network: input [x, time embedding],
/// SiLU hidden layers, linear output of size dim.
struct MlpSpec {
  int dim = 2;
  int time_embed = 16;
  std::vector<int> hidden{128, 128, 128};

  void validate() const;
};

/// Sinusoidal features of tau = t / T: sin and cos of tau * (pi/2) * 2^k.
Vector time_embedding(int t, int steps, int width);

/// Fully connected epsilon-prediction network used as a score model via
/// s(x, t) = -eps(x, t) / sqrt(1 - alpha_bar_t).
class LearnedScoreModel final : public ScoreModel {
 public:
  /// Random initialization, deterministic in seed.
  LearnedScoreModel(MlpSpec spec, NoiseSchedule schedule, std::uint64_t seed);
  LearnedScoreModel(MlpSpec spec, NoiseSchedule schedule, std::vector<Matrix> weights,
                    std::vector<Vector> biases);

  int dim() const override { return spec_.dim; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  bool has_analytic_jacobian() const override { return true; }

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

  /// Epsilon prediction for each column of xs.
  Matrix predict_eps(const Matrix& xs, int t) const;

  int steps_trained() const { return steps_trained_; }
  bool trained() const { return steps_trained_ > 0; }
  double final_loss() const { return final_loss_; }
  void set_training_record(int steps, double final_loss);

  /// Forward pass that keeps every layer's pre-activation and output.
  struct Activations {
    std::vector<Matrix> pre;   // one per hidden layer
    std::vector<Matrix> post;  // post[0] is the network input
    Matrix eps;
  };
  Activations forward(const Matrix& xs, int t) const;

  /// Pull an eps-cotangent back to the network input; the first dim rows
  /// of the result are d/dx.
  Matrix backward_input(const Activations& acts, const Matrix& eps_cotangent) const;

  void write(std::ostream& out) const;
  static std::unique_ptr<LearnedScoreModel> read(std::istream& in);

 protected:
  Matrix eval_scores(const Matrix& xs, int t) const override;
  Matrix eval_jacobian(const Vector& x, int t) const override;
  std::unique_ptr<ScoreTape> eval_record(const Matrix& xs, int t) const override;

 private:
  friend struct MlpTrainer;
  double score_scale(int t) const;

  MlpSpec spec_;
  NoiseSchedule schedule_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  int steps_trained_ = 0;
  double final_loss_ = 0.0;
};

struct TrainOptions {
  int steps = 2000;
  int batch = 128;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::unique_ptr<LearnedScoreModel> model;
  std::vector<double> loss_history;  // one entry per step
};

/// Denoising score matching with SGD + momentum:
/// minimize E |eps(sqrt(ab) x0 + sqrt(1 - ab) e, t) - e|^2 over t ~ U{1..T}.
/// dataset is d x n. Throws NumericalError if the loss stops being finite.
TrainResult train_dsm(const Matrix& dataset, const MlpSpec& spec, const NoiseSchedule& schedule,
                      const TrainOptions& options);

}  // namespace ficd
