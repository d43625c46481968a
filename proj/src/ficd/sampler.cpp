// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "ficd/parallel.hpp"

namespace ficd {

std::string_view to_string(Discretization d) {
  return d == Discretization::kDdim ? "ddim" : "sde_euler";
}

Discretization parse_discretization(std::string_view text) {
  if (text == "sde_euler" || text == "sde" || text == "euler") return Discretization::kSdeEuler;
  if (text == "ddim") return Discretization::kDdim;
  throw InvalidArgument("unknown discretization '" + std::string(text) + "' (expected sde_euler or ddim)");
}

std::string_view to_string(RhoScaling s) { return s == RhoScaling::kBeta ? "beta" : "constant"; }

RhoScaling parse_rho_scaling(std::string_view text) {
  if (text == "constant") return RhoScaling::kConstant;
  if (text == "beta") return RhoScaling::kBeta;
  throw InvalidArgument("unknown rho scaling '" + std::string(text) + "' (expected constant or beta)");
}

void SamplerConfig::validate(int steps) const {
  require(steps >= 1, "sampler needs at least one step");
  require(n_chains > 0, "n_chains must be positive");
  require(rho.size() == 1 || static_cast<int>(rho.size()) == steps,
          "rho must have 1 or T = " + std::to_string(steps) + " entries, got " + std::to_string(rho.size()));
  for (double r : rho) require(std::isfinite(r) && r >= 0.0, "rho must be finite and >= 0");
  require(std::isfinite(lambda), "lambda must be finite");
  require(std::isfinite(ddim_eta) && ddim_eta >= 0.0 && ddim_eta <= 1.0, "ddim eta must lie in [0, 1]");
  require(time_travel.repeats >= 0 && time_travel.repeats < 256, "time-travel repeats must lie in 0..255");
  if (time_travel.t_lo != 0 || time_travel.t_hi != 0) {
    require(time_travel.t_lo >= 1 && time_travel.t_hi <= steps && time_travel.t_lo <= time_travel.t_hi,
            "time-travel window must satisfy 1 <= t_lo <= t_hi <= T");
  }
  require(threads >= 0, "threads must be >= 0");
}

double SamplerConfig::rho_at(const NoiseSchedule& schedule, int t) const {
  const double base = rho.size() == 1 ? rho[0] : rho[static_cast<std::size_t>(t - 1)];
  return rho_scaling == RhoScaling::kBeta ? base * schedule.beta(t) : base;
}

std::pair<int, int> SamplerConfig::travel_window(int steps) const {
  if (time_travel.repeats == 0) return {1, 0};
  if (time_travel.t_lo == 0 && time_travel.t_hi == 0) return {steps / 3 + 1, (2 * steps) / 3};
  return {time_travel.t_lo, time_travel.t_hi};
}

int SamplerConfig::repeats_at(int steps, int t) const {
  const auto [lo, hi] = travel_window(steps);
  return t >= lo && t <= hi ? time_travel.repeats : 0;
}

namespace {

struct StepParams {
  bool guidance = false;
  Strategy strategy = Strategy::kUnit;
  const EnergyFunction* energy = nullptr;
  const Condition* condition = nullptr;
  double lambda = 1.0;
  Discretization discretization = Discretization::kSdeEuler;
  double ddim_eta = 0.0;
  bool reuse_score = true;
};

struct StepResult {
  Matrix next;
  GuidanceBatch guidance;  // empty when unguided
};

Matrix base_step(const StepParams& p, const ScoreModel& model, const Matrix& xs, const Matrix& scores,
                 int t, const Matrix& noise) {
  const NoiseSchedule& schedule = model.schedule();
  if (p.discretization == Discretization::kSdeEuler) {
    const double beta = schedule.beta(t);
    return (1.0 + 0.5 * beta) * xs + beta * scores + std::sqrt(beta) * noise;
  }
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const double sigma = ddim_sigma(schedule, t, p.ddim_eta);
  require(sigma * sigma <= 1.0 - ab_prev, "ddim sigma too large at t = " + std::to_string(t));
  const Matrix x0 = tweedie_from_scores(xs, scores, ab);
  const Matrix eps = -std::sqrt(1.0 - ab) * scores;
  return std::sqrt(ab_prev) * x0 + std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma)) * eps + sigma * noise;
}

StepResult step_batch(const StepParams& p, const ScoreModel& model, const Matrix& xs, int t,
                      const Matrix& noise, double rho) {
  StepResult out;
  Matrix scores;
  if (p.guidance) {
    out.guidance = conditional_term_batch(p.strategy, model, *p.energy, xs, t, *p.condition, p.lambda);
    scores = p.reuse_score ? out.guidance.scores : model.score_batch(xs, t);
  } else {
    scores = model.score_batch(xs, t);
  }
  out.next = base_step(p, model, xs, scores, t, noise);
  if (p.guidance) out.next -= rho * out.guidance.gradient;
  return out;
}

Vector single(const StepParams& p, const ScoreModel& model, const Vector& x, int t, const Vector& noise,
              double rho) {
  require(x.size() == model.dim() && noise.size() == model.dim(), "state and noise must match the model dimension");
  Matrix xs = x, zs = noise;
  Vector next = step_batch(p, model, xs, t, zs, rho).next.col(0);
  if (!next.allFinite()) throw NumericalError("step produced a non-finite state at t = " + std::to_string(t));
  return next;
}

}  // namespace

Vector unconditional_step(const ScoreModel& model, const Vector& x, int t, const Vector& noise) {
  return single(StepParams{}, model, x, t, noise, 0.0);
}

Vector guided_step(Strategy strategy, const ScoreModel& model, const EnergyFunction& energy, const Vector& x,
                   int t, const Condition& c, double rho, double lambda, const Vector& noise) {
  StepParams p;
  p.guidance = true;
  p.strategy = strategy;
  p.energy = &energy;
  p.condition = &c;
  p.lambda = lambda;
  return single(p, model, x, t, noise, rho);
}

Vector ficd_step(const ScoreModel& model, const EnergyFunction& energy, const Vector& x, int t,
                 const Condition& c, double rho, double lambda, const Vector& noise) {
  return guided_step(Strategy::kFicd, model, energy, x, t, c, rho, lambda, noise);
}

Vector ddim_step(const ScoreModel& model, const Vector& x, int t, double sigma, const Vector& noise) {
  const NoiseSchedule& schedule = model.schedule();
  const DdimCoefficients coef = ddim_coefficients(schedule, t, sigma);
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const Vector s = model.score(x, t);
  const Vector x0 = tweedie_from_score(x, s, ab);
  const Vector eps = -std::sqrt(1.0 - ab) * s;
  Vector next = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev - coef.sigma * coef.sigma) * eps +
                coef.sigma * noise;
  if (!next.allFinite()) throw NumericalError("ddim step produced a non-finite state at t = " + std::to_string(t));
  return next;
}

Vector renoise(const NoiseSchedule& schedule, const Vector& x_prev, int t, const Vector& noise) {
  const double beta = schedule.beta(t);
  return std::sqrt(1.0 - beta) * x_prev + std::sqrt(beta) * noise;
}

Vector time_travel_wrap(const std::function<Vector(const Vector&)>& step, const NoiseSchedule& schedule,
                        const Vector& x, int t, int repeats, NoiseStream& rng) {
  require(repeats >= 0, "time-travel repeats must be >= 0");
  Vector prev = step(x);
  for (int r = 0; r < repeats; ++r) {
    const Vector back = renoise(schedule, prev, t, rng.normal_vector(prev.size()));
    prev = step(back);
  }
  return prev;
}

int SampleResult::failed_count() const {
  return static_cast<int>(std::count(failed.begin(), failed.end(), 1));
}

Matrix SampleResult::valid_samples() const {
  Matrix out(samples.rows() - failed_count(), samples.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    if (!failed[static_cast<std::size_t>(i)]) out.row(r++) = samples.row(i);
  }
  return out;
}

namespace {

struct RowAccumulator {
  double grad_sum = 0.0;
  double coef_sum = 0.0;
  double coef_count = 0.0;
  double fisher_sum = 0.0;
  double alive = 0.0;
  double time = 0.0;
  double score_evals = 0.0;
  double jacobian_passes = 0.0;
};

struct BlockOutput {
  std::vector<RowAccumulator> rows;
  double max_energy_grad = 0.0;
};

}  // namespace

SampleResult sample(const SamplerConfig& config, const ScoreModel& model, const EnergyFunction* energy,
                    const Condition* c) {
  const NoiseSchedule& schedule = model.schedule();
  const int T = schedule.steps();
  const int d = model.dim();
  config.validate(T);
  if (config.guidance) {
    require(energy != nullptr && c != nullptr, "guided sampling needs an energy and a condition");
    energy->check(*c, d);
  }

  StepParams params;
  params.guidance = config.guidance;
  params.strategy = config.strategy;
  params.energy = energy;
  params.condition = c;
  params.lambda = config.lambda;
  params.discretization = config.discretization;
  params.ddim_eta = config.ddim_eta;
  params.reuse_score = config.reuse_score;

  std::vector<int> row_t, row_repeat;
  for (int t = T; t >= 1; --t) {
    for (int r = 0; r <= config.repeats_at(T, t); ++r) {
      row_t.push_back(t);
      row_repeat.push_back(r);
    }
  }
  const std::size_t n_rows = row_t.size();
  const int n = config.n_chains;
  const std::size_t n_blocks = static_cast<std::size_t>((n + kChainBlock - 1) / kChainBlock);

  SampleResult result;
  result.samples.resize(n, d);
  result.failed.assign(static_cast<std::size_t>(n), 0);
  result.failed_at.assign(static_cast<std::size_t>(n), 0);
  std::vector<BlockOutput> blocks(n_blocks);

  const EvalCounts before = model.counts();
  const auto start = std::chrono::steady_clock::now();

  parallel_for(n_blocks, config.threads, [&](std::size_t b) {
    const int first = static_cast<int>(b) * kChainBlock;
    const int cols = std::min(kChainBlock, n - first);
    BlockOutput& out = blocks[b];
    out.rows.resize(n_rows);
    std::vector<char> alive(static_cast<std::size_t>(cols), 1);

    Matrix xs(d, cols), noise(d, cols);
    for (int j = 0; j < cols; ++j) {
      NoiseStream(config.seed, static_cast<std::uint64_t>(first + j), substream_id(0, 0, StreamPurpose::kInit))
          .fill_normal(xs.col(j));
    }

    auto kill = [&](int j, int t) {
      if (!alive[static_cast<std::size_t>(j)]) return;
      alive[static_cast<std::size_t>(j)] = 0;
      result.failed[static_cast<std::size_t>(first + j)] = 1;
      result.failed_at[static_cast<std::size_t>(first + j)] = t;
    };

    std::size_t row = 0;
    for (int t = T; t >= 1; --t) {
      const int repeats = config.repeats_at(T, t);
      const double rho = config.rho_at(schedule, t);
      for (int rep = 0; rep <= repeats; ++rep, ++row) {
        const bool quiet = t == 1 && !config.final_step_noise;
        for (int j = 0; j < cols; ++j) {
          if (quiet) {
            noise.col(j).setZero();
          } else {
            NoiseStream(config.seed, static_cast<std::uint64_t>(first + j), substream_id(t, rep, StreamPurpose::kStep))
                .fill_normal(noise.col(j));
          }
        }

        const auto t0 = std::chrono::steady_clock::now();
        StepResult step = step_batch(params, model, xs, t, noise, rho);
        const auto t1 = std::chrono::steady_clock::now();

        RowAccumulator& acc = out.rows[row];
        acc.time += std::chrono::duration<double>(t1 - t0).count();
        const double evals_per_chain = (config.guidance && !config.reuse_score) ? 2.0 : 1.0;
        const double vjp_per_chain = config.guidance && config.strategy == Strategy::kExact ? 1.0 : 0.0;

        for (int j = 0; j < cols; ++j) {
          if (!alive[static_cast<std::size_t>(j)]) {
            step.next.col(j).setZero();
            continue;
          }
          if (!step.next.col(j).allFinite()) {
            kill(j, t);
            step.next.col(j).setZero();
            continue;
          }
          acc.alive += 1.0;
          acc.score_evals += evals_per_chain;
          acc.jacobian_passes += vjp_per_chain;
          if (config.guidance) {
            const double gn = step.guidance.gradient.col(j).norm();
            const double en = step.guidance.energy_grad.col(j).norm();
            acc.grad_sum += gn;
            if (config.lambda != 0.0) out.max_energy_grad = std::max(out.max_energy_grad, en / std::abs(config.lambda));
            if (config.strategy == Strategy::kExact) {
              if (en > 0.0) {
                acc.coef_sum += gn / en;
                acc.coef_count += 1.0;
              }
            } else {
              acc.coef_sum += step.guidance.coefficient;
              acc.coef_count += 1.0;
            }
          }
          if (config.trace_fisher) {
            acc.fisher_sum += spectral_radius(model.jacobian(xs.col(j), t));
          }
        }
        xs = std::move(step.next);

        if (rep < repeats) {
          const double beta = schedule.beta(t);
          for (int j = 0; j < cols; ++j) {
            NoiseStream(config.seed, static_cast<std::uint64_t>(first + j),
                        substream_id(t, rep, StreamPurpose::kTimeTravel))
                .fill_normal(noise.col(j));
          }
          xs = std::sqrt(1.0 - beta) * xs + std::sqrt(beta) * noise;
        }
      }
    }
    for (int j = 0; j < cols; ++j) result.samples.row(first + j) = xs.col(j).transpose();
  });

  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const EvalCounts after = model.counts();
  result.counts = {after.score_evals - before.score_evals, after.jacobian_passes - before.jacobian_passes};

  result.trace.rows.resize(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    RowAccumulator total;
    for (const BlockOutput& blk : blocks) {
      const RowAccumulator& a = blk.rows[r];
      total.grad_sum += a.grad_sum;
      total.coef_sum += a.coef_sum;
      total.coef_count += a.coef_count;
      total.fisher_sum += a.fisher_sum;
      total.alive += a.alive;
      total.time += a.time;
      total.score_evals += a.score_evals;
      total.jacobian_passes += a.jacobian_passes;
    }
    TraceRow& tr = result.trace.rows[r];
    tr.t = row_t[r];
    tr.repeat = row_repeat[r];
    const double alive = std::max(total.alive, 1.0);
    tr.grad_norm = total.grad_sum / alive;
    if (config.trace_fisher) tr.fisher_spectral_radius = total.fisher_sum / alive;
    tr.cr_bound = cramer_rao_bound(schedule, tr.t);
    tr.coefficient_used = total.coef_count > 0.0 ? total.coef_sum / total.coef_count : 0.0;
    tr.step_wall_time_s = total.time;
    tr.score_evals = total.score_evals / alive;
    tr.jacobian_passes = total.jacobian_passes / alive;
  }
  for (const BlockOutput& blk : blocks) {
    result.trace.kappa_estimate = std::max(result.trace.kappa_estimate, blk.max_energy_grad);
  }

  const int failed = result.failed_count();
  if (failed > 0 && static_cast<double>(failed) > 0.01 * n) {
    std::ostringstream msg;
    msg << failed << " of " << n << " chains went non-finite (limit 1%); first failures:";
    int shown = 0;
    for (int i = 0; i < n && shown < 8; ++i) {
      if (result.failed[static_cast<std::size_t>(i)]) {
        msg << " chain " << i << " at t=" << result.failed_at[static_cast<std::size_t>(i)] << ';';
        ++shown;
      }
    }
    throw ChainFailure(msg.str());
  }
  return result;
}

}  // namespace ficd
