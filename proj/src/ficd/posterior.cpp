// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/posterior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace ficd {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kExact: return "exact";
    case Strategy::kFicd: return "ficd";
    case Strategy::kMpgd: return "mpgd";
    case Strategy::kUnit: return "unit";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "exact") return Strategy::kExact;
  if (s == "ficd") return Strategy::kFicd;
  if (s == "mpgd") return Strategy::kMpgd;
  if (s == "unit") return Strategy::kUnit;
  throw InvalidArgument("unknown strategy '" + std::string(text) + "' (expected exact, ficd, mpgd or unit)");
}

Vector tweedie_from_score(const Vector& x, const Vector& score, double alpha_bar) {
  require(alpha_bar > 0.0, "posterior mean needs alpha_bar > 0");
  return (x + (1.0 - alpha_bar) * score) / std::sqrt(alpha_bar);
}

Matrix tweedie_from_scores(const Matrix& xs, const Matrix& scores, double alpha_bar) {
  require(alpha_bar > 0.0, "posterior mean needs alpha_bar > 0");
  return (xs + (1.0 - alpha_bar) * scores) / std::sqrt(alpha_bar);
}

Vector tweedie_posterior_mean(const ScoreModel& model, const Vector& x, int t) {
  const double ab = model.schedule().alpha_bar(t);
  if (ab == 1.0) return x;
  return tweedie_from_score(x, model.score(x, t), ab);
}

double spectral_radius(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() > 0, "spectral radius needs a non-empty square matrix");
  if (!m.allFinite()) throw NumericalError("spectral radius of a matrix with non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

FisherInfo fisher_information(const ScoreModel& model, const Vector& x, int t) {
  FisherInfo info;
  info.matrix = model.jacobian(x, t);
  info.spectral_radius = spectral_radius(info.matrix);
  info.t = t;
  return info;
}

double cramer_rao_bound(const NoiseSchedule& schedule, int t) {
  const double ab = schedule.alpha_bar(t);
  require(ab < 1.0, "Cramer-Rao bound is undefined at alpha_bar = 1");
  return 1.0 / (1.0 - ab);
}

Matrix posterior_jacobian_from(const Matrix& score_jacobian, double alpha_bar) {
  require(alpha_bar > 0.0, "posterior Jacobian needs alpha_bar > 0");
  const Eigen::Index d = score_jacobian.rows();
  return (Matrix::Identity(d, d) + (1.0 - alpha_bar) * score_jacobian) / std::sqrt(alpha_bar);
}

Matrix posterior_jacobian_exact(const ScoreModel& model, const Vector& x, int t) {
  return posterior_jacobian_from(model.jacobian(x, t), model.schedule().alpha_bar(t));
}

double posterior_coefficient(Strategy strategy, double alpha_bar, double alpha_bar_prev) {
  require(alpha_bar > 0.0 && alpha_bar <= 1.0, "alpha_bar must lie in (0, 1]");
  require(alpha_bar_prev > 0.0 && alpha_bar_prev <= 1.0, "alpha_bar_prev must lie in (0, 1]");
  switch (strategy) {
    case Strategy::kFicd: return 2.0 / std::sqrt(alpha_bar);
    case Strategy::kMpgd: return std::sqrt(alpha_bar_prev);
    case Strategy::kUnit: return 1.0;
    case Strategy::kExact: break;
  }
  throw InvalidArgument("the exact strategy has no scalar posterior coefficient");
}

double posterior_coefficient(Strategy strategy, const NoiseSchedule& schedule, int t) {
  require(t >= 1 && t <= schedule.steps(), "timestep outside 1..T");
  return posterior_coefficient(strategy, schedule.alpha_bar(t), schedule.alpha_bar(t - 1));
}

}  // namespace ficd
