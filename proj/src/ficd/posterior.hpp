// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "ficd/common.hpp"
#include "ficd/score_model.hpp"

namespace ficd {

/// How the posterior part d x0_hat / d x_t of the conditional gradient is handled.
enum class Strategy {
  kExact,  // transpose posterior Jacobian times the energy gradient
  kFicd,   // 2 / sqrt(ab_t)
  kMpgd,   // sqrt(ab_{t-1})
  kUnit,   // 1
};

std::string_view to_string(Strategy s);
/// Accepts exact, ficd, mpgd, unit (case-insensitive).
Strategy parse_strategy(std::string_view text);

/// x0_hat = (x + (1 - ab_t) s) / sqrt(ab_t).
Vector tweedie_posterior_mean(const ScoreModel& model, const Vector& x, int t);
/// Same formula with a score already in hand.
Vector tweedie_from_score(const Vector& x, const Vector& score, double alpha_bar);
Matrix tweedie_from_scores(const Matrix& xs, const Matrix& scores, double alpha_bar);

/// Largest absolute eigenvalue.
double spectral_radius(const Matrix& m);

struct FisherInfo {
  Matrix matrix;
  double spectral_radius = 0.0;
  int t = 0;
};

/// Score Jacobian at (x, t), analytic when the model has one.
FisherInfo fisher_information(const ScoreModel& model, const Vector& x, int t);

/// 1 / (1 - ab_t).
double cramer_rao_bound(const NoiseSchedule& schedule, int t);

/// (I + (1 - ab_t) J) / sqrt(ab_t).
Matrix posterior_jacobian_exact(const ScoreModel& model, const Vector& x, int t);
Matrix posterior_jacobian_from(const Matrix& score_jacobian, double alpha_bar);

/// FICD 2/sqrt(ab_t), MPGD sqrt(ab_{t-1}), UNIT 1. EXACT has no scalar form.
double posterior_coefficient(Strategy strategy, const NoiseSchedule& schedule, int t);
double posterior_coefficient(Strategy strategy, double alpha_bar, double alpha_bar_prev);

}  // namespace ficd
