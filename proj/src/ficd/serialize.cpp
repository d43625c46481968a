// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ficd {

void write_schedule(KeyValues& kv, const std::string& prefix, const NoiseSchedule& schedule) {
  const ScheduleSpec& s = schedule.spec();
  kv.set(prefix + ".kind", std::string(to_string(s.kind)));
  kv.set(prefix + ".T", std::to_string(s.steps));
  kv.set(prefix + ".beta_min", format_double(s.beta_min));
  kv.set(prefix + ".beta_max", format_double(s.beta_max));
  if (s.kind == ScheduleKind::kCustom) {
    const auto b = schedule.betas();
    kv.set(prefix + ".betas", format_vector(Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()))));
  }
}

NoiseSchedule read_schedule(const KeyValues& kv, const std::string& prefix) {
  ScheduleSpec spec;
  try {
    spec.kind = parse_schedule_kind(kv.get_string(prefix + ".kind", "linear"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("key '" + prefix + ".kind': " + e.what());
  }
  spec.steps = static_cast<int>(kv.get_int(prefix + ".T", spec.steps));
  spec.beta_min = kv.get_double(prefix + ".beta_min", spec.beta_min);
  spec.beta_max = kv.get_double(prefix + ".beta_max", spec.beta_max);
  try {
    if (spec.kind == ScheduleKind::kCustom) {
      const Vector b = kv.get_vector(prefix + ".betas");
      return NoiseSchedule::from_betas(std::vector<double>(b.data(), b.data() + b.size()));
    }
    if (spec.kind == ScheduleKind::kCosine) return NoiseSchedule::cosine(spec.steps, kv.get_double(prefix + ".beta_max", 0.999));
    return NoiseSchedule::from_spec(spec);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid schedule: ") + e.what());
  }
}

void write_gmm(KeyValues& kv, const std::string& prefix, const GaussianMixture& gmm) {
  kv.set(prefix + ".weights", format_vector(Eigen::Map<const Vector>(gmm.weights.data(), gmm.components())));
  Matrix means(gmm.components(), gmm.dim());
  for (int i = 0; i < gmm.components(); ++i) means.row(i) = gmm.means[static_cast<std::size_t>(i)].transpose();
  kv.set(prefix + ".means", format_matrix(means));
  for (int i = 0; i < gmm.components(); ++i) {
    kv.set(prefix + ".cov." + std::to_string(i), format_matrix(gmm.covariances[static_cast<std::size_t>(i)]));
  }
}

GaussianMixture read_gmm(const KeyValues& kv, const std::string& prefix) {
  const Vector w = kv.get_vector(prefix + ".weights");
  const Matrix means = kv.get_matrix(prefix + ".means");
  if (means.rows() != w.size()) {
    throw ConfigError("'" + prefix + ".means' has " + std::to_string(means.rows()) + " rows but there are " +
                      std::to_string(w.size()) + " weights");
  }
  GaussianMixture gmm;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    gmm.weights.push_back(w[i]);
    gmm.means.push_back(means.row(i).transpose());
  }
  const int d = static_cast<int>(means.cols());
  if (kv.has(prefix + ".variances")) {
    const Vector v = kv.get_vector(prefix + ".variances");
    if (v.size() == 1 || v.size() == w.size()) {
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        gmm.covariances.push_back(v[v.size() == 1 ? 0 : i] * Matrix::Identity(d, d));
      }
    } else {
      throw ConfigError("'" + prefix + ".variances' needs 1 or " + std::to_string(w.size()) + " entries");
    }
  } else {
    for (Eigen::Index i = 0; i < w.size(); ++i) gmm.covariances.push_back(kv.get_matrix(prefix + ".cov." + std::to_string(i)));
  }
  try {
    gmm.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("invalid mixture '" + prefix + "': " + e.what());
  }
  return gmm;
}

void write_condition(KeyValues& kv, const std::string& prefix, const Condition& c) {
  kv.set(prefix + ".kind", std::string(to_string(c.kind)));
  if (c.kind != Condition::Kind::kFeatures) kv.set(prefix + ".y", format_vector(c.y));
  if (c.kind == Condition::Kind::kLinear) kv.set(prefix + ".A", format_matrix(c.a));
  if (c.kind == Condition::Kind::kFeatures) kv.set(prefix + ".features", format_matrix(c.features));
}

Condition read_condition(const KeyValues& kv, const std::string& prefix) {
  Condition::Kind kind;
  try {
    kind = parse_condition_kind(kv.get_string(prefix + ".kind", "point"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("key '" + prefix + ".kind': " + e.what());
  }
  switch (kind) {
    case Condition::Kind::kPoint: return Condition::point(kv.get_vector(prefix + ".y"));
    case Condition::Kind::kLinear: return Condition::linear(kv.get_matrix(prefix + ".A"), kv.get_vector(prefix + ".y"));
    case Condition::Kind::kFeatures: return Condition::reference_features(kv.get_matrix(prefix + ".features"));
  }
  throw ConfigError("unreachable condition kind");
}

void write_samples_csv(std::ostream& out, const Matrix& samples, const std::vector<int>& ids) {
  out << "chain_id";
  for (Eigen::Index k = 0; k < samples.cols(); ++k) out << ",dim_" << k;
  out << '\n';
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out << ids[r];
    for (Eigen::Index k = 0; k < samples.cols(); ++k) out << ',' << format_double(samples(static_cast<Eigen::Index>(r), k));
    out << '\n';
  }
}

Matrix read_points_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool skip_first_column = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (rows.empty() && !skip_first_column && text.substr(0, 8) == "chain_id") {
      skip_first_column = true;
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    bool first = true;
    while (start <= text.size()) {
      auto end = text.find(',', start);
      if (end == std::string_view::npos) end = text.size();
      if (!(first && skip_first_column)) {
        try {
          row.push_back(parse_double(text.substr(start, end - start)));
        } catch (const InvalidArgument& e) {
          throw IoError("points file line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      first = false;
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("points file line " + std::to_string(line_no) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw IoError("points file holds no points");
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].size(); ++k) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  }
  return out;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "t,grad_norm,fisher_spectral_radius,cr_bound,coefficient_used,step_wall_time_s,score_evals,jacobian_passes\n";
  for (const TraceRow& r : trace.rows) {
    out << r.t << ',' << format_double(r.grad_norm) << ',' << format_double(r.fisher_spectral_radius) << ','
        << format_double(r.cr_bound) << ',' << format_double(r.coefficient_used) << ','
        << format_double(r.step_wall_time_s) << ',' << format_double(r.score_evals) << ','
        << format_double(r.jacobian_passes) << '\n';
  }
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "strategy,reps,median_run_s,median_step_s,min_run_s,max_run_s,score_evals_per_step,jacobian_passes_per_step\n";
  for (const BenchRow& r : rows) {
    out << r.strategy << ',' << r.reps << ',' << format_double(r.median_run_s) << ','
        << format_double(r.median_step_s) << ',' << format_double(r.min_run_s) << ','
        << format_double(r.max_run_s) << ',' << format_double(r.score_evals_per_step) << ','
        << format_double(r.jacobian_passes_per_step) << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ficd
