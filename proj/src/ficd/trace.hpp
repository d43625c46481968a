// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace ficd {

/// One guided-step invocation. Averages are over the chains that were still
/// alive; counts are per chain.
struct TraceRow {
  int t = 0;
  int repeat = 0;  // 0 for the plain step, k for the k-th time-travel re-step
  double grad_norm = 0.0;
  double fisher_spectral_radius = std::numeric_limits<double>::quiet_NaN();
  double cr_bound = 0.0;
  double coefficient_used = 0.0;
  double step_wall_time_s = 0.0;
  double score_evals = 0.0;
  double jacobian_passes = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  /// Largest energy-gradient norm seen on the trajectory (empirical kappa).
  double kappa_estimate = 0.0;
};

}  // namespace ficd
