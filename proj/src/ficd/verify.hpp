// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ficd/analytics.hpp"
#include "ficd/experiment.hpp"

namespace ficd {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  /// Measurements that are reported but never fail the suite.
  std::vector<std::string> notes;
  bool pass() const;
  std::string to_text() const;
};

/// Suites expanded by "all".
const std::vector<std::string>& default_suites();
/// Every suite name, including the slower end-to-end ones
/// (tilt, inverse, phase, uncond, speedup).
const std::vector<std::string>& known_suites();

/// Runs a suite against the configured schedule. Throws ConfigError for an
/// unknown name.
SuiteReport run_suite(const std::string& name, const ExperimentConfig& config);

/// E[x0 | x_t] for x0 ~ N(mu0, s0sq I) under the VP forward process.
Vector conjugate_posterior_mean(const Vector& mu0, double s0sq, double alpha_bar, const Vector& x);

// End-to-end measurements shared by the suites, the trace/bench commands
// and the acceptance tests.

struct TiltMetrics {
  double sw_guided = 0.0;  // sampler output vs oracle draw
  double sw_self = 0.0;    // two independent oracle draws
  double sw_uncond = 0.0;  // unconditional sampler vs oracle draw
  GaussianMixture oracle;
};
TiltMetrics tilt_metrics(const ExperimentConfig& config);

struct InverseMetrics {
  Vector oracle_mean;
  Matrix oracle_covariance;
  Vector mean_exact;
  Vector mean_ficd;
  double err_exact = 0.0;
  double err_ficd = 0.0;
};
InverseMetrics inverse_metrics(const ExperimentConfig& config);

struct PhaseMetrics {
  PhaseProfile exact;
  PhaseProfile ficd;
  RunTrace trace_exact;
  RunTrace trace_ficd;
};
PhaseMetrics phase_metrics(const ExperimentConfig& config);

struct UncondMetrics {
  Vector mean;
  Vector standard_error;
  Vector variance;
  int n = 0;
};
UncondMetrics uncond_metrics(const ExperimentConfig& config);

struct SpeedupMetrics {
  std::vector<BenchRow> rows;  // ficd first, exact second
  double ratio = 0.0;          // median FICD run time / median EXACT run time
};
SpeedupMetrics speedup_metrics(const ExperimentConfig& config);

}  // namespace ficd
