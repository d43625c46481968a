// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ficd/common.hpp"
#include "ficd/schedule.hpp"

namespace ficd {

class ScoreModel;

/// Cumulative evaluation counters of a score model.
struct EvalCounts {
  std::uint64_t score_evals = 0;
  std::uint64_t jacobian_passes = 0;
};

/// Score values for a batch of points plus whatever the model needs to
/// pull cotangents back through them afterwards.
///
/// The two-phase shape exists because the cotangent in a guided step
/// depends on the score itself (through the posterior mean).
class ScoreTape {
 public:
  virtual ~ScoreTape() = default;

  /// d x n, one column per recorded point.
  const Matrix& scores() const { return scores_; }

  /// Column j of the result is J(x_j)^T v_j where J = d score / d x.
  /// Counts one Jacobian pass per column.
  Matrix vjp(const Matrix& cotangents) const;

 protected:
  ScoreTape(const ScoreModel& model, Matrix scores) : model_(model), scores_(std::move(scores)) {}
  virtual Matrix eval_vjp(const Matrix& cotangents) const = 0;

 private:
  const ScoreModel& model_;
  Matrix scores_;
};

/// Score oracle s(x, t) ~ grad_x log p_t(x) for the variance-preserving
/// forward process of the attached schedule.
///
/// Implementations are immutable; concurrent calls are safe. Batches put one
/// point per column.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  ScoreModel() = default;
  ScoreModel(const ScoreModel&) = delete;
  ScoreModel& operator=(const ScoreModel&) = delete;

  virtual int dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;
  virtual bool has_analytic_jacobian() const { return false; }

  Vector score(const Vector& x, int t) const;
  Matrix score_batch(const Matrix& xs, int t) const;
  /// d x d matrix d s / d x, analytic when available, else central differences.
  Matrix jacobian(const Vector& x, int t) const;
  std::unique_ptr<ScoreTape> record(const Matrix& xs, int t) const;

  EvalCounts counts() const;
  void reset_counts() const;

 protected:
  virtual Matrix eval_scores(const Matrix& xs, int t) const = 0;
  virtual Matrix eval_jacobian(const Vector& x, int t) const;
  /// Default tape keeps the points and pulls back through eval_jacobian.
  virtual std::unique_ptr<ScoreTape> eval_record(const Matrix& xs, int t) const;

  void check_input(const Matrix& xs, int t) const;

 private:
  friend class ScoreTape;
  void add_jacobian_passes(std::uint64_t n) const { jacobian_passes_ += n; }

  mutable std::atomic<std::uint64_t> score_evals_{0};
  mutable std::atomic<std::uint64_t> jacobian_passes_{0};
};

/// Central-difference Jacobian of f at x; column j is (f(x+h e_j) - f(x-h e_j)) / 2h.
Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                            double h);

/// Default step 1e-4 * (1 + |x|_inf).
double default_fd_step(const Vector& x);

/// Central-difference Jacobian of a model's score. Does not touch the
/// model's counters.
Matrix finite_diff_jacobian(const ScoreModel& model, const Vector& x, int t,
                            std::optional<double> h = std::nullopt);

/// Gaussian mixture over R^d with full covariances.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int components() const { return static_cast<int>(weights.size()); }

  /// Throws InvalidArgument unless weights are a distribution and every
  /// covariance is symmetric positive definite with consistent shapes.
  void validate() const;

  static GaussianMixture isotropic(std::vector<double> weights, std::vector<Vector> means,
                                   const std::vector<double>& variances);
  static GaussianMixture single(const Vector& mean, double variance);
};

/// Closed-form score of the VP marginal
/// p_t = sum_i w_i N(sqrt(ab) mu_i, ab Sigma_i + (1 - ab) I).
Vector gmm_marginal_score(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                          const Vector& x, int t);

/// Hessian of log p_t: sum_i r_i (-S_i^-1) + Cov_r[g_i], symmetric by construction.
Matrix gmm_score_jacobian(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                          const Vector& x, int t);

/// ScoreModel backed by a Gaussian mixture. Per-timestep component inverses
/// are precomputed at construction.
class GmmScoreModel final : public ScoreModel {
 public:
  GmmScoreModel(GaussianMixture gmm, NoiseSchedule schedule);

  int dim() const override { return gmm_.dim(); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  bool has_analytic_jacobian() const override { return true; }
  const GaussianMixture& mixture() const { return gmm_; }

  struct Component {
    double log_weight;
    double half_log_det;
    Vector mean;       // sqrt(ab) mu_i
    Matrix precision;  // (ab Sigma_i + (1 - ab) I)^-1
  };

 protected:
  Matrix eval_scores(const Matrix& xs, int t) const override;
  Matrix eval_jacobian(const Vector& x, int t) const override;

 private:
  GaussianMixture gmm_;
  NoiseSchedule schedule_;
  std::vector<std::vector<Component>> by_step_;  // [t][component], t = 0..T
};

/// Score with a fixed functional form, mostly for tests and examples:
/// s(x, t) = f(x, t).
class FunctionScoreModel final : public ScoreModel {
 public:
  using Fn = std::function<Vector(const Vector&, int)>;
  FunctionScoreModel(int dim, NoiseSchedule schedule, Fn fn);

  int dim() const override { return dim_; }
  const NoiseSchedule& schedule() const override { return schedule_; }

 protected:
  Matrix eval_scores(const Matrix& xs, int t) const override;

 private:
  int dim_;
  NoiseSchedule schedule_;
  Fn fn_;
};

/// s = -eps / sqrt(1 - ab_t).
Vector eps_to_score(const Vector& eps, const NoiseSchedule& schedule, int t);
/// eps = -sqrt(1 - ab_t) s.
Vector score_to_eps(const Vector& score, const NoiseSchedule& schedule, int t);

}  // namespace ficd
