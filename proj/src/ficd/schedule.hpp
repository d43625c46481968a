// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ficd/common.hpp"

namespace ficd {

enum class ScheduleKind { kLinear, kCosine, kCustom };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

/// The flat record a schedule is rebuilt from. For linear schedules the beta
/// vector follows bit-exactly from these four fields.
struct ScheduleSpec {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  ScheduleKind kind = ScheduleKind::kLinear;
};

/// Forward-process noise schedule, indexed t = 1..T with alpha_bar(0) = 1.
///
/// Immutable after construction. Every accessor validates its index and
/// throws InvalidArgument when it is out of range.
class NoiseSchedule {
 public:
  /// beta_t = beta_min + (t-1)(beta_max - beta_min)/(T-1); T = 1 uses beta_min.
  static NoiseSchedule linear(int steps, double beta_min, double beta_max);

  /// Cosine schedule with offset 0.008, betas clipped to beta_max.
  static NoiseSchedule cosine(int steps, double beta_max = 0.999);

  /// Arbitrary betas in (0,1), betas[0] being beta_1.
  static NoiseSchedule from_betas(std::vector<double> betas);

  static NoiseSchedule from_spec(const ScheduleSpec& spec);

  int steps() const { return static_cast<int>(betas_.size()); }
  const ScheduleSpec& spec() const { return spec_; }

  double beta(int t) const;
  double alpha(int t) const;
  /// Cumulative product of alphas up to t; 1 at t = 0.
  double alpha_bar(int t) const;

  std::span<const double> betas() const { return betas_; }
  /// alpha_bar(0..T), T+1 entries.
  std::span<const double> alpha_bars() const { return alpha_bars_; }

 private:
  NoiseSchedule(ScheduleSpec spec, std::vector<double> betas);
  void check_step(int t) const;

  ScheduleSpec spec_;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

/// Coefficients of the DDIM reverse step written in the form
/// x_{t-1} = x_t / sqrt(j) + m * eps + sigma * noise, j = alpha_bar_t / alpha_bar_{t-1}.
struct DdimCoefficients {
  double sigma = 0.0;
  double m = 0.0;
  double j = 1.0;
};

DdimCoefficients ddim_coefficients(double alpha_bar_t, double alpha_bar_prev, double sigma);
DdimCoefficients ddim_coefficients(const NoiseSchedule& schedule, int t, double sigma);

/// Standard DDIM stochasticity: eta = 0 is deterministic, eta = 1 matches DDPM.
double ddim_sigma(const NoiseSchedule& schedule, int t, double eta);

}  // namespace ficd
