// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ficd/analytics.hpp"
#include "ficd/guidance.hpp"
#include "ficd/kv.hpp"
#include "ficd/schedule.hpp"
#include "ficd/score_model.hpp"
#include "ficd/trace.hpp"

namespace ficd {

// Flat records under a key prefix, e.g. prefix "schedule" gives schedule.T.

void write_schedule(KeyValues& kv, const std::string& prefix, const NoiseSchedule& schedule);
/// Missing keys take the defaults of ScheduleSpec.
NoiseSchedule read_schedule(const KeyValues& kv, const std::string& prefix);

/// prefix.weights, prefix.means (rows), and either prefix.variances
/// (isotropic, one per component) or prefix.cov.<i> per component.
void write_gmm(KeyValues& kv, const std::string& prefix, const GaussianMixture& gmm);
GaussianMixture read_gmm(const KeyValues& kv, const std::string& prefix);

/// prefix.kind plus prefix.y / prefix.A / prefix.features as the kind needs.
void write_condition(KeyValues& kv, const std::string& prefix, const Condition& c);
Condition read_condition(const KeyValues& kv, const std::string& prefix);

/// chain_id,dim_0,...; rows listed in `ids` order.
void write_samples_csv(std::ostream& out, const Matrix& samples, const std::vector<int>& ids);
/// Reads a points file: either a samples CSV with header or bare
/// comma-separated rows. Returns n x d.
Matrix read_points_csv(std::istream& in);

void write_trace_csv(std::ostream& out, const RunTrace& trace);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

std::string read_file(const std::string& path);
/// Truncates and writes; IoError on failure.
void write_file(const std::string& path, const std::string& contents);

}  // namespace ficd
