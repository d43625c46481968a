// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ficd {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return "linear";
    case ScheduleKind::kCosine:
      return "cosine";
    case ScheduleKind::kCustom:
      return "custom";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "linear") return ScheduleKind::kLinear;
  if (text == "cosine") return ScheduleKind::kCosine;
  if (text == "custom") return ScheduleKind::kCustom;
  throw InvalidArgument("unknown schedule kind '" + std::string(text) + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleSpec spec, std::vector<double> betas)
    : spec_(spec), betas_(std::move(betas)) {
  require(!betas_.empty(), "schedule needs at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size() + 1);
  alpha_bars_.push_back(1.0);
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double beta = betas_[i];
    if (!(beta > 0.0 && beta < 1.0)) {
      throw InvalidArgument("beta_" + std::to_string(i + 1) + " = " + std::to_string(beta) +
                            " is outside (0, 1)");
    }
    alphas_.push_back(1.0 - beta);
    alpha_bars_.push_back(alpha_bars_.back() * alphas_.back());
  }
  spec_.steps = static_cast<int>(betas_.size());
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_min, double beta_max) {
  require(steps >= 1, "schedule length must be positive, got " + std::to_string(steps));
  require(beta_min > 0.0 && beta_min < 1.0, "beta_min must lie in (0, 1)");
  require(beta_max > 0.0 && beta_max < 1.0, "beta_max must lie in (0, 1)");
  require(beta_min <= beta_max, "beta_min must not exceed beta_max");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    betas[t - 1] = steps == 1 ? beta_min
                              : beta_min + (t - 1) * (beta_max - beta_min) / (steps - 1);
  }
  return NoiseSchedule({steps, beta_min, beta_max, ScheduleKind::kLinear}, std::move(betas));
}

NoiseSchedule NoiseSchedule::cosine(int steps, double beta_max) {
  require(steps >= 1, "schedule length must be positive, got " + std::to_string(steps));
  require(beta_max > 0.0 && beta_max < 1.0, "beta_max must lie in (0, 1)");
  constexpr double offset = 0.008;
  auto f = [&](int t) {
    const double u = (static_cast<double>(t) / steps + offset) / (1.0 + offset);
    const double c = std::cos(u * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> betas(static_cast<std::size_t>(steps));
  double min_beta = 1.0;
  for (int t = 1; t <= steps; ++t) {
    betas[t - 1] = std::clamp(1.0 - f(t) / f(t - 1), 1e-12, beta_max);
    min_beta = std::min(min_beta, betas[t - 1]);
  }
  return NoiseSchedule({steps, min_beta, beta_max, ScheduleKind::kCosine}, std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  require(!betas.empty(), "schedule needs at least one step");
  const auto [lo, hi] = std::minmax_element(betas.begin(), betas.end());
  ScheduleSpec spec{static_cast<int>(betas.size()), *lo, *hi, ScheduleKind::kCustom};
  return NoiseSchedule(spec, std::move(betas));
}

NoiseSchedule NoiseSchedule::from_spec(const ScheduleSpec& spec) {
  switch (spec.kind) {
    case ScheduleKind::kLinear:
      return linear(spec.steps, spec.beta_min, spec.beta_max);
    case ScheduleKind::kCosine:
      return cosine(spec.steps, spec.beta_max);
    case ScheduleKind::kCustom:
      break;
  }
  throw InvalidArgument("a custom schedule cannot be rebuilt from its summary record");
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside 1.." +
                          std::to_string(steps()));
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return betas_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alphas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_step(t);
  return alpha_bars_[t];
}

DdimCoefficients ddim_coefficients(double alpha_bar_t, double alpha_bar_prev, double sigma) {
  require(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0, "alpha_bar_t must lie in (0, 1]");
  require(alpha_bar_prev > 0.0 && alpha_bar_prev <= 1.0, "alpha_bar_{t-1} must lie in (0, 1]");
  require(sigma >= 0.0, "sigma_t must be non-negative");
  const double radicand = 1.0 - alpha_bar_prev - sigma * sigma;
  if (radicand < 0.0) {
    throw InvalidArgument("sigma_t^2 = " + std::to_string(sigma * sigma) +
                          " exceeds 1 - alpha_bar_{t-1} = " + std::to_string(1.0 - alpha_bar_prev));
  }
  DdimCoefficients c;
  c.sigma = sigma;
  c.j = alpha_bar_t / alpha_bar_prev;
  c.m = std::sqrt(radicand) -
        std::sqrt(alpha_bar_prev) / std::sqrt(alpha_bar_t) * std::sqrt(1.0 - alpha_bar_t);
  return c;
}

DdimCoefficients ddim_coefficients(const NoiseSchedule& schedule, int t, double sigma) {
  require(t >= 1 && t <= schedule.steps(), "timestep outside 1..T");
  return ddim_coefficients(schedule.alpha_bar(t), schedule.alpha_bar(t - 1), sigma);
}

double ddim_sigma(const NoiseSchedule& schedule, int t, double eta) {
  require(eta >= 0.0, "ddim eta must be non-negative");
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

}  // namespace ficd
