// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "ficd/posterior.hpp"
#include "ficd/random.hpp"

namespace ficd {

GaussianPosterior linear_gaussian_posterior(const Vector& mu0, const Matrix& sigma0, const Matrix& a,
                                            const Vector& y, double noise_var) {
  const Eigen::Index d = mu0.size();
  require(sigma0.rows() == d && sigma0.cols() == d, "prior covariance must be d x d");
  require(a.cols() == d && a.rows() == y.size(), "measurement operator must be m x d with y in R^m");
  require(std::isfinite(noise_var) && noise_var > 0.0, "noise variance must be positive");
  Eigen::LLT<Matrix> prior(sigma0);
  require(prior.info() == Eigen::Success, "prior covariance is not positive definite");
  const Matrix prior_prec = prior.solve(Matrix::Identity(d, d));
  const Matrix prec = prior_prec + a.transpose() * a / noise_var;
  Eigen::LLT<Matrix> post(prec);
  require(post.info() == Eigen::Success, "posterior precision is singular");
  GaussianPosterior out;
  out.covariance = post.solve(Matrix::Identity(d, d));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.mean = out.covariance * (prior_prec * mu0 + a.transpose() * y / noise_var);
  return out;
}

GaussianMixture tilted_gmm_oracle(const GaussianMixture& gmm, const Vector& c, double lambda) {
  gmm.validate();
  const int d = gmm.dim();
  require(c.size() == d, "tilt center dimension does not match the mixture");
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  if (lambda == 0.0) return gmm;
  const Matrix id = Matrix::Identity(d, d);
  GaussianMixture out;
  std::vector<double> log_w;
  for (int i = 0; i < gmm.components(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (gmm.weights[k] == 0.0) continue;
    Eigen::LLT<Matrix> cov(gmm.covariances[k]);
    const Matrix prec = cov.solve(id) + 2.0 * lambda * id;
    Eigen::LLT<Matrix> prec_llt(prec);
    Matrix new_cov = prec_llt.solve(id);
    new_cov = 0.5 * (new_cov + new_cov.transpose());
    const Vector new_mean = prec_llt.solve(cov.solve(gmm.means[k]) + 2.0 * lambda * c);
    // Evidence: N(mu_i; c, Sigma_i + I / (2 lambda)).
    const Matrix s = gmm.covariances[k] + id / (2.0 * lambda);
    Eigen::LLT<Matrix> s_llt(s);
    const Vector diff = gmm.means[k] - c;
    const double quad = diff.dot(s_llt.solve(diff));
    const double log_det = 2.0 * s_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    log_w.push_back(std::log(gmm.weights[k]) - 0.5 * quad - 0.5 * log_det);
    out.means.push_back(new_mean);
    out.covariances.push_back(new_cov);
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double lw : log_w) total += std::exp(lw - top);
  for (double lw : log_w) out.weights.push_back(std::exp(lw - top) / total);
  return out;
}

Matrix sample_gmm(const GaussianMixture& gmm, int n, std::uint64_t seed) {
  gmm.validate();
  require(n >= 0, "sample count must be >= 0");
  const int d = gmm.dim();
  std::vector<Matrix> chol;
  for (const Matrix& cov : gmm.covariances) chol.push_back(Eigen::LLT<Matrix>(cov).matrixL().toDenseMatrix());
  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    NoiseStream rng(seed, static_cast<std::uint64_t>(i), substream_id(0, 0, StreamPurpose::kAux));
    const double u = rng.uniform();
    int k = 0;
    double acc = gmm.weights[0];
    while (u > acc && k + 1 < gmm.components()) acc += gmm.weights[static_cast<std::size_t>(++k)];
    const Vector z = rng.normal_vector(d);
    out.row(i) = (gmm.means[static_cast<std::size_t>(k)] + chol[static_cast<std::size_t>(k)] * z).transpose();
  }
  return out;
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "Wasserstein distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  if (a.size() == b.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / na;
  }
  // Integral of |F_a - F_b| over the merged support.
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double next;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      next = a[i];
    } else {
      next = b[j];
    }
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    prev = next;
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
  }
  return total;
}

double sliced_wasserstein(const Matrix& a, const Matrix& b, int n_projections, std::uint64_t seed) {
  require(a.rows() > 0 && b.rows() > 0, "sliced Wasserstein of an empty sample");
  require(a.cols() == b.cols(), "sample sets have different dimensions");
  require(n_projections > 0, "need at least one projection");
  const Eigen::Index d = a.cols();
  double total = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    NoiseStream rng(seed, static_cast<std::uint64_t>(p), substream_id(0, 1, StreamPurpose::kAux));
    Vector dir = rng.normal_vector(d);
    while (dir.norm() == 0.0) dir = rng.normal_vector(d);
    dir.normalize();
    const Vector pa = a * dir;
    const Vector pb = b * dir;
    total += wasserstein_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                            std::vector<double>(pb.data(), pb.data() + pb.size()));
  }
  return total / n_projections;
}

double BoundReport::violation_rate() const {
  return samples.empty() ? 0.0 : static_cast<double>(violations) / static_cast<double>(samples.size());
}

BoundReport bound_verification(const ScoreModel& model, const Matrix& x_grid, const std::vector<int>& t_set) {
  require(x_grid.cols() == model.dim(), "grid points must have the model dimension");
  BoundReport report;
  for (int t : t_set) {
    const double bound = cramer_rao_bound(model.schedule(), t);
    for (Eigen::Index i = 0; i < x_grid.rows(); ++i) {
      const FisherInfo info = fisher_information(model, x_grid.row(i).transpose(), t);
      BoundSample s{t, static_cast<int>(i), info.spectral_radius, bound, info.spectral_radius / bound};
      if (s.spectral_radius > s.bound) ++report.violations;
      report.max_ratio = std::max(report.max_ratio, s.ratio);
      report.samples.push_back(s);
    }
  }
  return report;
}

PhaseProfile phase_profile(const RunTrace& trace) {
  require(!trace.rows.empty(), "phase profile of an empty trace");
  std::vector<int> ts;
  for (const TraceRow& r : trace.rows) ts.push_back(r.t);
  std::sort(ts.begin(), ts.end(), std::greater<>());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  const std::size_t n = ts.size();
  double sum[3] = {0, 0, 0};
  double count[3] = {0, 0, 0};
  for (const TraceRow& r : trace.rows) {
    const auto pos = static_cast<std::size_t>(std::find(ts.begin(), ts.end(), r.t) - ts.begin());
    const std::size_t tercile = pos * 3 / n;
    sum[tercile] += r.grad_norm;
    count[tercile] += 1.0;
  }
  auto mean = [&](int k) { return count[k] > 0.0 ? sum[k] / count[k] : 0.0; };
  return {mean(0), mean(1), mean(2)};
}

bool DeviationReport::all_pass() const {
  return std::all_of(steps.begin(), steps.end(), [](const DeviationStep& s) { return s.pass; });
}

std::vector<int> DeviationReport::failing_steps() const {
  std::vector<int> out;
  for (const DeviationStep& s : steps) {
    if (!s.pass) out.push_back(s.t);
  }
  return out;
}

double deviation_bound(double rho, double kappa, double alpha_bar, double alpha_bar_prev) {
  const double a = std::sqrt(alpha_bar);
  return rho * kappa * (2.0 * std::sqrt(alpha_bar_prev) - a) / a;
}

double deviation_bound_tight(double rho, double kappa, double alpha_bar, double alpha_bar_prev) {
  return rho * kappa * (2.0 / std::sqrt(alpha_bar) - std::sqrt(alpha_bar_prev));
}

DeviationReport deviation_bound_check(const ScoreModel& model, const EnergyFunction& energy,
                                      const Condition& c, const DeviationSetup& setup) {
  require(setup.n_chains > 0, "need at least one chain");
  require(std::isfinite(setup.rho) && setup.rho >= 0.0, "rho must be finite and >= 0");
  require(std::isfinite(setup.kappa) && setup.kappa >= 0.0, "kappa must be finite and >= 0");
  const NoiseSchedule& schedule = model.schedule();
  const int d = model.dim();
  const int n = setup.n_chains;
  Matrix xs(d, n);
  for (int j = 0; j < n; ++j) {
    NoiseStream(setup.seed, static_cast<std::uint64_t>(j), substream_id(0, 0, StreamPurpose::kInit))
        .fill_normal(xs.col(j));
  }
  DeviationReport report;
  for (int t = schedule.steps(); t >= 1; --t) {
    const double a = std::sqrt(schedule.alpha_bar(t));
    const double b = std::sqrt(schedule.alpha_bar(t - 1));
    DeviationStep step;
    step.t = t;
    step.bound = deviation_bound(setup.rho, setup.kappa, a * a, b * b);
    step.exact_bound = deviation_bound_tight(setup.rho * setup.lambda, setup.kappa, a * a, b * b);
    Matrix next(d, n);
    for (int j = 0; j < n; ++j) {
      Vector noise = Vector::Zero(d);
      if (t > 1) {
        noise = NoiseStream(setup.seed, static_cast<std::uint64_t>(j), substream_id(t, 0, StreamPurpose::kStep))
                    .normal_vector(d);
      }
      const Vector x = xs.col(j);
      const Vector f = guided_step(Strategy::kFicd, model, energy, x, t, c, setup.rho, setup.lambda, noise);
      const Vector m = guided_step(Strategy::kMpgd, model, energy, x, t, c, setup.rho, setup.lambda, noise);
      step.max_deviation = std::max(step.max_deviation, (f - m).norm());
      next.col(j) = f;
    }
    step.pass = step.max_deviation < step.bound;
    report.steps.push_back(step);
    xs = std::move(next);
  }
  return report;
}

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<BenchRow> benchmark_steps(const ScoreModel& model, const std::vector<Strategy>& strategies,
                                      const EnergyFunction& energy, const Condition& c,
                                      const SamplerConfig& base, int reps) {
  require(reps >= 1, "benchmark needs at least one repetition");
  const int T = model.schedule().steps();
  const std::size_t k = strategies.size();
  std::vector<SamplerConfig> configs(k, base);
  for (std::size_t i = 0; i < k; ++i) {
    configs[i].guidance = true;
    configs[i].strategy = strategies[i];
    sample(configs[i], model, &energy, &c);  // warm-up
  }
  // Strategies alternate within each repetition so slow drifts in machine
  // load hit all of them alike.
  std::vector<std::vector<double>> times(k);
  std::vector<EvalCounts> totals(k);
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const SampleResult res = sample(configs[i], model, &energy, &c);
      times[i].push_back(res.wall_time_s);
      totals[i].score_evals += res.counts.score_evals;
      totals[i].jacobian_passes += res.counts.jacobian_passes;
    }
  }
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < k; ++i) {
    BenchRow row;
    row.strategy = std::string(to_string(strategies[i]));
    row.median_run_s = median(times[i]);
    row.median_step_s = row.median_run_s / T;
    row.min_run_s = *std::min_element(times[i].begin(), times[i].end());
    row.max_run_s = *std::max_element(times[i].begin(), times[i].end());
    row.reps = reps;
    const double per = static_cast<double>(reps) * base.n_chains * T;
    row.score_evals_per_step = static_cast<double>(totals[i].score_evals) / per;
    row.jacobian_passes_per_step = static_cast<double>(totals[i].jacobian_passes) / per;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ficd
