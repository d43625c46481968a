// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "ficd/posterior.hpp"
#include "ficd/random.hpp"
#include "ficd/serialize.hpp"

namespace ficd {

namespace {

// Seed tags for oracle draws and projections.
constexpr std::uint32_t kTagOracleA = 10;
constexpr std::uint32_t kTagOracleB = 11;
constexpr std::uint32_t kTagProjections = 12;
constexpr std::uint32_t kTagSuitePoints = 13;

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

class Recorder {
 public:
  explicit Recorder(std::string suite) { report_.suite = std::move(suite); }

  void check(std::string name, bool pass, std::string detail) {
    report_.checks.push_back({std::move(name), pass, std::move(detail)});
  }
  void note(std::string text) { report_.notes.push_back(std::move(text)); }
  SuiteReport take() { return std::move(report_); }

 private:
  SuiteReport report_;
};

/// Random points, one per row, from N(0, scale^2 I).
Matrix random_points(std::uint64_t seed, int n, int d, double scale, std::uint32_t stream) {
  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    NoiseStream rng(seed, static_cast<std::uint64_t>(i), substream_id(0, static_cast<int>(stream), StreamPurpose::kAux));
    out.row(i) = scale * rng.normal_vector(d).transpose();
  }
  return out;
}

std::vector<int> spread_steps(int T, int count) {
  std::vector<int> ts;
  for (int k = 0; k < count; ++k) {
    const int t = count == 1 ? T : 1 + static_cast<int>(std::lround(static_cast<double>(k) * (T - 1) / (count - 1)));
    if (ts.empty() || ts.back() != t) ts.push_back(t);
  }
  return ts;
}

Vector mean_rows(const Matrix& m) { return m.colwise().mean().transpose(); }

// ---------------------------------------------------------------- suites

SuiteReport suite_schedule(const ExperimentConfig& config) {
  Recorder rec("schedule");
  const NoiseSchedule s = config.schedule();
  const int T = s.steps();
  double worst = 0.0;
  bool decreasing = true;
  bool j_ok = true;
  long double product = 1.0L;
  double worst_product = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double ab = s.alpha_bar(t);
    worst = std::max(worst, std::abs(ab - s.alpha_bar(t - 1) * s.alpha(t)) / ab);
    decreasing = decreasing && ab < s.alpha_bar(t - 1);
    const double j = ddim_coefficients(s, t, 0.0).j;
    j_ok = j_ok && j > 0.0 && j < 1.0;
    product *= 1.0L - static_cast<long double>(s.beta(t));
    worst_product = std::max(worst_product, static_cast<double>(std::abs(ab - product) / product));
  }
  rec.check("recurrence alpha_bar(t) = alpha_bar(t-1) alpha(t)", worst <= 1e-12, "max rel err " + num(worst));
  rec.check("alpha_bar strictly decreasing, alpha_bar(0) = 1", decreasing && s.alpha_bar(0) == 1.0,
            "alpha_bar(T) = " + num(s.alpha_bar(T)));
  rec.check("j_t in (0,1)", j_ok, "T = " + std::to_string(T));
  rec.check("running product vs extended precision", worst_product <= 1e-12, "max rel err " + num(worst_product));
  if (s.spec().kind == ScheduleKind::kLinear) {
    KeyValues kv;
    write_schedule(kv, "s", s);
    const NoiseSchedule back = read_schedule(kv, "s");
    bool same = back.steps() == T;
    for (int t = 1; same && t <= T; ++t) same = back.beta(t) == s.beta(t);
    rec.check("record round trip reproduces betas bit-exactly", same, kv.get_string("s.T", ""));
  }
  return rec.take();
}

SuiteReport suite_tweedie(const ExperimentConfig& config) {
  Recorder rec("tweedie");
  const NoiseSchedule s = config.schedule();
  const std::vector<double> variances{0.25, 0.5, 1.0, 2.0, 4.0};
  const std::vector<int> ts = spread_steps(s.steps(), 5);
  Vector mu0(3);
  mu0 << 0.5, -1.0, 0.25;
  const Matrix xs = random_points(derive_seed(config.seed(), kTagSuitePoints), 100, 3, 2.0, 0);
  double worst = 0.0;
  for (double v : variances) {
    GmmScoreModel model(GaussianMixture::single(mu0, v), s);
    for (int t : ts) {
      const double ab = s.alpha_bar(t);
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const Vector x = xs.row(i).transpose();
        const Vector got = tweedie_posterior_mean(model, x, t);
        worst = std::max(worst, (got - conjugate_posterior_mean(mu0, v, ab, x)).cwiseAbs().maxCoeff());
      }
    }
  }
  rec.check("posterior mean equals conjugate Gaussian oracle", worst <= 1e-9,
            "max abs err " + num(worst) + " over 5 variances x " + std::to_string(ts.size()) + " steps x 100 points");
  return rec.take();
}

std::vector<std::pair<std::string, GaussianMixture>> test_mixtures() {
  std::vector<std::pair<std::string, GaussianMixture>> out;
  {
    GaussianMixture g;
    g.weights = {0.3, 0.7};
    Vector m1(2), m2(2);
    m1 << -1.0, 0.5;
    m2 << 1.5, -1.0;
    g.means = {m1, m2};
    Matrix c1(2, 2), c2(2, 2);
    c1 << 0.5, 0.1, 0.1, 0.3;
    c2 << 1.0, -0.2, -0.2, 0.6;
    g.covariances = {c1, c2};
    out.emplace_back("anisotropic-2d", g);
  }
  {
    Vector a(3), b(3), c(3);
    a << 1.0, 0.0, -1.0;
    b << -1.0, 1.0, 0.5;
    c << 0.0, -1.5, 1.0;
    out.emplace_back("isotropic-3d", GaussianMixture::isotropic({0.2, 0.5, 0.3}, {a, b, c}, {0.4, 1.0, 2.0}));
  }
  {
    Vector a(2), b(2);
    a << -2.0, 0.0;
    b << 2.0, 0.0;
    out.emplace_back("bimodal-2d", GaussianMixture::isotropic({0.5, 0.5}, {a, b}, {0.5, 0.5}));
  }
  return out;
}

SuiteReport suite_fisher(const ExperimentConfig& config) {
  Recorder rec("fisher");
  const NoiseSchedule s = config.schedule();
  const std::uint64_t seed = derive_seed(config.seed(), kTagSuitePoints);
  for (const auto& [name, gmm] : test_mixtures()) {
    GmmScoreModel model(gmm, s);
    const int d = gmm.dim();
    const Matrix xs = random_points(seed, 100, d, 2.0, 1);
    double worst = 0.0, worst_sym = 0.0;
    for (int i = 0; i < 100; ++i) {
      NoiseStream rng(seed, static_cast<std::uint64_t>(i), substream_id(0, 2, StreamPurpose::kAux));
      const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.steps())));
      const Vector x = xs.row(i).transpose();
      const Matrix j = model.jacobian(x, t);
      const Matrix fd = finite_diff_jacobian(model, x, t);
      worst = std::max(worst, (j - fd).norm() / j.norm());
      worst_sym = std::max(worst_sym, (j - j.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, j.cwiseAbs().maxCoeff()));
    }
    rec.check("analytic Jacobian vs central differences (" + name + ")", worst <= 1e-5,
              "max rel Frobenius err " + num(worst) + " over 100 (x,t)");
    rec.check("analytic Jacobian symmetric (" + name + ")", worst_sym <= 1e-10, "max asym " + num(worst_sym));
  }
  return rec.take();
}

SuiteReport suite_bound(const ExperimentConfig& config) {
  Recorder rec("bound");
  const NoiseSchedule s = config.schedule();
  const std::vector<double> variances{4.0, 1.0, 0.25, 0.0625, 0.01};  // shrinking sigma_0
  const std::vector<int> ts = spread_steps(s.steps(), 10);
  const Matrix grid = random_points(derive_seed(config.seed(), kTagSuitePoints), 8, 2, 2.0, 3);
  bool below = true, formula = true, monotone = true;
  double worst_formula = 0.0, max_ratio = 0.0;
  for (int t : ts) {
    const double ab = s.alpha_bar(t);
    double prev_ratio = -1.0;
    for (double v : variances) {
      GmmScoreModel model(GaussianMixture::single(Vector::Zero(2), v), s);
      const BoundReport r = bound_verification(model, grid, {t});
      const double expected = 1.0 / (ab * v + 1.0 - ab);
      for (const BoundSample& b : r.samples) {
        const double err = std::abs(b.spectral_radius - expected) / expected;
        worst_formula = std::max(worst_formula, err);
        formula = formula && err <= 1e-9;
        below = below && b.spectral_radius <= b.bound;
        max_ratio = std::max(max_ratio, b.ratio);
      }
      const double ratio = r.samples.front().ratio;
      monotone = monotone && ratio > prev_ratio;
      prev_ratio = ratio;
    }
  }
  rec.check("Gaussian spectral radius equals 1/(ab s0^2 + 1 - ab)", formula, "max rel err " + num(worst_formula));
  rec.check("Gaussian spectral radius <= 1/(1 - ab)", below, "max ratio " + num(max_ratio));
  rec.check("ratio increases as sigma_0 shrinks", monotone, "sigma_0^2 in {4, 1, 0.25, 0.0625, 0.01}");

  // Mixtures: measured, never asserted.
  Vector a(2), b(2);
  a << -5.0, 0.0;
  b << 5.0, 0.0;
  GmmScoreModel bimodal(GaussianMixture::isotropic({0.5, 0.5}, {a, b}, {1.0, 1.0}), s);
  Matrix line(41, 2);
  for (int i = 0; i < 41; ++i) line.row(i) << -8.0 + 0.4 * i, 0.0;
  const int mid = std::max(1, s.steps() / 2);
  for (int t : {std::max(1, s.steps() / 10), mid}) {
    const BoundReport r = bound_verification(bimodal, line, {t});
    rec.note("bimodal modes +-5, t=" + std::to_string(t) + ": max ratio " + num(r.max_ratio) + ", violation rate " +
             num(r.violation_rate()));
  }
  return rec.take();
}

SuiteReport suite_deviation(const ExperimentConfig& config) {
  Recorder rec("deviation-bound");
  const NoiseSchedule s = config.schedule();
  GmmScoreModel model(GaussianMixture::single(Vector::Zero(2), 1.0), s);
  DistanceEnergy energy;
  Vector target(2);
  target << 2.0, -1.0;
  const Condition c = Condition::point(target);
  DeviationSetup setup;
  setup.rho = 0.5;
  setup.kappa = 1.0;
  setup.n_chains = 64;
  setup.seed = config.seed();
  const DeviationReport r = deviation_bound_check(model, energy, c, setup);
  const std::vector<int> bad = r.failing_steps();
  std::string detail = std::to_string(bad.size()) + " of " + std::to_string(r.steps.size()) + " steps at or above the bound";
  if (!bad.empty()) {
    const DeviationStep& worst = *std::max_element(r.steps.begin(), r.steps.end(), [](const auto& x, const auto& y) {
      return x.max_deviation - x.bound < y.max_deviation - y.bound;
    });
    detail += "; e.g. t=" + std::to_string(worst.t) + " deviation " + num(worst.max_deviation) + " vs bound " +
              num(worst.bound) + "; offending t:";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 10); ++i) detail += " " + std::to_string(bad[i]);
    if (bad.size() > 10) detail += " ...";
  }
  rec.check("|x_ficd - x_mpgd| < rho kappa (2 sqrt(ab_{t-1}) - sqrt(ab_t)) / sqrt(ab_t)", r.all_pass(), detail);
  bool tight = true;
  double worst_gap = -1e300;
  for (const DeviationStep& st : r.steps) {
    tight = tight && st.max_deviation <= st.exact_bound * (1.0 + 1e-12);
    worst_gap = std::max(worst_gap, st.max_deviation - st.exact_bound);
  }
  rec.check("|x_ficd - x_mpgd| <= rho kappa (2 / sqrt(ab_t) - sqrt(ab_{t-1}))", tight,
            "max(deviation - bound) " + num(worst_gap));
  return rec.take();
}

double fd_gradient_error(const EnergyFunction& e, const Vector& x, const Condition& c) {
  const double h = 1e-5 * (1.0 + x.cwiseAbs().maxCoeff());
  Vector fd(x.size());
  Vector p = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    p[k] = x[k] + h;
    const double up = e.value(p, c);
    p[k] = x[k] - h;
    const double down = e.value(p, c);
    p[k] = x[k];
    fd[k] = (up - down) / (2.0 * h);
  }
  const Vector g = e.grad(x, c);
  return (g - fd).norm() / std::max(1.0, g.norm());
}

SuiteReport suite_energy(const ExperimentConfig& config) {
  Recorder rec("energy");
  const std::uint64_t seed = derive_seed(config.seed(), kTagSuitePoints);
  const Matrix pts = random_points(seed, 100, 4, 1.5, 4);
  const Matrix aux = random_points(seed, 30, 1, 1.0, 5);
  Vector target(4);
  target << 0.3, -0.2, 1.0, 0.5;

  auto run = [&](const std::string& name, const EnergyFunction& e, const Condition& c) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) worst = std::max(worst, fd_gradient_error(e, pts.row(i).transpose(), c));
    rec.check(name + " gradient vs central differences", worst <= 1e-6, "max rel err " + num(worst) + " on 100 points");
  };
  run("quadratic", QuadraticEnergy(), Condition::point(target));
  run("distance", DistanceEnergy(), Condition::point(target));
  Matrix a(3, 4);
  for (int k = 0; k < 12; ++k) a(k / 4, k % 4) = aux(k, 0);
  Vector y(3);
  y << aux(12, 0), aux(13, 0), aux(14, 0);
  run("linear", LinearMeasurementEnergy(), Condition::linear(a, y));
  LinearFeatureMap map{2, 3, Matrix(6, 4)};
  for (int k = 0; k < 24; ++k) map.w(k % 6, k / 6) = aux(k % 30, 0) * (k % 2 ? 1.0 : -0.5) + 0.1 * k / 24.0;
  Matrix ref(2, 3);
  ref << 0.5, -1.0, 0.2, 1.0, 0.3, -0.4;
  run("gram", GramEnergy(map), Condition::reference_features(ref));

  bool unit = true;
  DistanceEnergy dist;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    unit = unit && std::abs(dist.grad(pts.row(i).transpose(), Condition::point(target)).norm() - 1.0) <= 1e-12;
  }
  rec.check("distance energy gradient has unit norm", unit, "kappa = 1");
  return rec.take();
}

SuiteReport suite_oracles(const ExperimentConfig& config) {
  Recorder rec("oracles");
  // 401 x 401 grid over [-8, 8]^2.
  constexpr int kGrid = 401;
  const double step = 16.0 / (kGrid - 1);
  auto grid_point = [&](int i, int j) {
    Vector p(2);
    p << -8.0 + step * i, -8.0 + step * j;
    return p;
  };

  {
    Vector mu0(2), y(2);
    mu0 << 0.5, -0.5;
    y << 1.0, -0.5;
    Matrix s0(2, 2), a(2, 2);
    s0 << 1.0, 0.3, 0.3, 0.8;
    a << 1.0, 0.5, -0.3, 1.0;
    const double noise_var = 0.5;
    const GaussianPosterior post = linear_gaussian_posterior(mu0, s0, a, y, noise_var);
    const Matrix prec = s0.inverse();
    double z = 0.0;
    Vector m = Vector::Zero(2);
    for (int i = 0; i < kGrid; ++i) {
      for (int j = 0; j < kGrid; ++j) {
        const Vector p = grid_point(i, j);
        const Vector r = a * p - y;
        const double w = std::exp(-0.5 * (p - mu0).dot(prec * (p - mu0)) - 0.5 * r.squaredNorm() / noise_var);
        z += w;
        m += w * p;
      }
    }
    m /= z;
    const double err = (m - post.mean).norm();
    rec.check("linear-Gaussian posterior mean vs grid integration", err <= 1e-3, "err " + num(err));
  }

  {
    Vector a(2), b(2), c(2);
    a << -2.0, 0.0;
    b << 2.0, 0.5;
    c << 0.5, 1.0;
    GaussianMixture g = GaussianMixture::isotropic({0.4, 0.6}, {a, b}, {0.5, 0.8});
    g.covariances[0](0, 1) = g.covariances[0](1, 0) = 0.1;
    const double lambda = 0.3;
    const GaussianMixture tilted = tilted_gmm_oracle(g, c, lambda);
    double wsum = 0.0;
    for (double w : tilted.weights) wsum += w;
    auto density = [](const GaussianMixture& m, const Vector& x) {
      double p = 0.0;
      for (int k = 0; k < m.components(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k);
        const Vector diff = x - m.means[i];
        const Matrix& cov = m.covariances[i];
        p += m.weights[i] * std::exp(-0.5 * diff.dot(cov.inverse() * diff)) /
             (2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
      }
      return p;
    };
    std::vector<double> unnorm(kGrid * kGrid), oracle(kGrid * kGrid);
    double z = 0.0;
    for (int i = 0; i < kGrid; ++i) {
      for (int j = 0; j < kGrid; ++j) {
        const Vector p = grid_point(i, j);
        const std::size_t k = static_cast<std::size_t>(i * kGrid + j);
        unnorm[k] = density(g, p) * std::exp(-lambda * (p - c).squaredNorm());
        oracle[k] = density(tilted, p);
        z += unnorm[k] * step * step;
      }
    }
    double tv = 0.0;
    for (std::size_t k = 0; k < unnorm.size(); ++k) tv += std::abs(unnorm[k] / z - oracle[k]) * step * step;
    tv *= 0.5;
    rec.check("tilted mixture weights sum to 1", std::abs(wsum - 1.0) <= 1e-12, "sum " + num(wsum));
    rec.check("tilted mixture vs grid normalization (total variation)", tv <= 1e-3, "TV " + num(tv));
  }

  {
    const std::uint64_t seed = derive_seed(config.seed(), kTagSuitePoints);
    const Matrix x = random_points(seed, 5000, 2, 1.0, 6);
    const Matrix y = random_points(seed, 5000, 2, 1.0, 7);
    const double same = sliced_wasserstein(x, x, 64, seed);
    const double two = sliced_wasserstein(x, y, 64, seed);
    const double rev = sliced_wasserstein(y, x, 64, seed);
    rec.check("sliced Wasserstein of identical sets is 0", same == 0.0, num(same));
    rec.check("sliced Wasserstein of two N=5000 Gaussian draws < 0.05", two < 0.05, num(two));
    rec.check("sliced Wasserstein is symmetric", std::abs(two - rev) <= 1e-12, num(two) + " vs " + num(rev));
    Matrix p0 = Matrix::Zero(1, 1), p1 = Matrix::Ones(1, 1);
    const double shift = sliced_wasserstein(p0, p1, 4, seed);
    rec.check("point masses at distance 1 in 1-d give 1", std::abs(shift - 1.0) <= 1e-15, num(shift));
  }
  return rec.take();
}

SuiteReport suite_sampler(const ExperimentConfig& config) {
  Recorder rec("sampler");
  const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.05);
  Vector a(2), b(2), target(2);
  a << -1.5, 0.0;
  b << 1.5, 0.5;
  target << 0.0, 1.0;
  GmmScoreModel model(GaussianMixture::isotropic({0.5, 0.5}, {a, b}, {0.3, 0.3}), s);
  QuadraticEnergy energy;
  const Condition c = Condition::point(target);
  SamplerConfig base;
  base.n_chains = 130;  // three blocks, the last one partial
  base.seed = config.seed();
  base.rho = {0.0};

  std::vector<Matrix> outs;
  for (Strategy st : {Strategy::kExact, Strategy::kFicd, Strategy::kMpgd, Strategy::kUnit}) {
    SamplerConfig sc = base;
    sc.strategy = st;
    outs.push_back(sample(sc, model, &energy, &c).samples);
  }
  SamplerConfig off = base;
  off.guidance = false;
  outs.push_back(sample(off, model, nullptr, nullptr).samples);
  bool identical = true;
  for (const Matrix& m : outs) identical = identical && m == outs.front();
  rec.check("rho = 0 gives identical samples for every strategy", identical, "exact, ficd, mpgd, unit, uncond");

  SamplerConfig g1 = base;
  g1.rho = {0.5};
  g1.threads = 1;
  SamplerConfig g4 = g1;
  g4.threads = 4;
  rec.check("1 and 4 threads give bitwise-identical samples",
            sample(g1, model, &energy, &c).samples == sample(g4, model, &energy, &c).samples, "ficd, rho = 0.5");

  SamplerConfig tt = g1;
  tt.time_travel.repeats = 2;
  const SampleResult r = sample(tt, model, &energy, &c);
  const auto [lo, hi] = tt.travel_window(s.steps());
  const std::size_t expected = static_cast<std::size_t>(s.steps() + 2 * (hi - lo + 1));
  rec.check("time travel adds one trace row per re-step", r.trace.rows.size() == expected,
            std::to_string(r.trace.rows.size()) + " rows, expected " + std::to_string(expected));
  return rec.take();
}

SuiteReport suite_tilt(const ExperimentConfig& config) {
  Recorder rec("tilt");
  const TiltMetrics m = tilt_metrics(config);
  rec.check("guided vs oracle <= 2 x oracle self-distance", m.sw_guided <= 2.0 * m.sw_self,
            num(m.sw_guided) + " vs 2 x " + num(m.sw_self));
  rec.check("guided closer to oracle than unconditional", m.sw_guided < m.sw_uncond,
            num(m.sw_guided) + " vs " + num(m.sw_uncond));
  return rec.take();
}

SuiteReport suite_inverse(const ExperimentConfig& config) {
  Recorder rec("inverse");
  const InverseMetrics m = inverse_metrics(config);
  rec.check("exact recovers the posterior mean within 0.1", m.err_exact <= 0.1, "err " + num(m.err_exact));
  rec.check("ficd recovers the posterior mean within 0.1", m.err_ficd <= 0.1, "err " + num(m.err_ficd));
  return rec.take();
}

SuiteReport suite_phase(const ExperimentConfig& config) {
  Recorder rec("phase");
  const PhaseMetrics m = phase_metrics(config);
  rec.check("exact: mid > 1.1 early and mid > 1.1 late", m.exact.mid > 1.1 * m.exact.early && m.exact.mid > 1.1 * m.exact.late,
            num(m.exact.early) + " / " + num(m.exact.mid) + " / " + num(m.exact.late));
  rec.check("ficd early > 1.1 exact early", m.ficd.early > 1.1 * m.exact.early,
            num(m.ficd.early) + " vs " + num(m.exact.early));
  return rec.take();
}

SuiteReport suite_uncond(const ExperimentConfig& config) {
  Recorder rec("uncond");
  const UncondMetrics m = uncond_metrics(config);
  bool mean_ok = true, var_ok = true;
  std::string mean_detail, var_detail;
  for (Eigen::Index k = 0; k < m.mean.size(); ++k) {
    mean_ok = mean_ok && std::abs(m.mean[k]) <= 3.0 * m.standard_error[k];
    var_ok = var_ok && std::abs(m.variance[k] - 1.0) <= 0.05;
    mean_detail += (k ? ", " : "") + num(m.mean[k]) + " (se " + num(m.standard_error[k]) + ")";
    var_detail += (k ? ", " : "") + num(m.variance[k]);
  }
  rec.check("terminal mean within 3 standard errors of 0", mean_ok, mean_detail);
  rec.check("terminal variance within 5% of 1", var_ok, var_detail);
  return rec.take();
}

SuiteReport suite_speedup(const ExperimentConfig& config) {
  Recorder rec("speedup");
  const SpeedupMetrics m = speedup_metrics(config);
  rec.check("median ficd time <= 0.75 x exact", m.ratio <= 0.75, "ratio " + num(m.ratio));
  for (const BenchRow& r : m.rows) {
    const double want = r.strategy == "exact" ? 1.0 : 0.0;
    rec.check(r.strategy + " Jacobian passes per step = " + num(want), r.jacobian_passes_per_step == want,
              num(r.jacobian_passes_per_step));
  }
  return rec.take();
}

const std::map<std::string, std::function<SuiteReport(const ExperimentConfig&)>>& suite_table() {
  static const std::map<std::string, std::function<SuiteReport(const ExperimentConfig&)>> table = {
      {"schedule", suite_schedule},   {"tweedie", suite_tweedie},        {"fisher", suite_fisher},
      {"bound", suite_bound},         {"deviation-bound", suite_deviation}, {"energy", suite_energy},
      {"oracles", suite_oracles},     {"sampler", suite_sampler},        {"tilt", suite_tilt},
      {"inverse", suite_inverse},     {"phase", suite_phase},            {"uncond", suite_uncond},
      {"speedup", suite_speedup},
  };
  return table;
}

}  // namespace

bool SuiteReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string SuiteReport::to_text() const {
  std::ostringstream out;
  out << "[" << suite << "]\n";
  for (const Check& c : checks) out << (c.pass ? "  PASS " : "  FAIL ") << c.name << " -- " << c.detail << "\n";
  for (const std::string& n : notes) out << "  NOTE " << n << "\n";
  return out.str();
}

const std::vector<std::string>& default_suites() {
  static const std::vector<std::string> names{"schedule", "tweedie", "fisher", "bound",
                                              "deviation-bound", "energy", "oracles", "sampler"};
  return names;
}

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = default_suites();
    for (const char* extra : {"tilt", "inverse", "phase", "uncond", "speedup"}) n.emplace_back(extra);
    return n;
  }();
  return names;
}

SuiteReport run_suite(const std::string& name, const ExperimentConfig& config) {
  const auto& table = suite_table();
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown verify suite '" + name + "'");
  return it->second(config);
}

Vector conjugate_posterior_mean(const Vector& mu0, double s0sq, double alpha_bar, const Vector& x) {
  const double a = std::sqrt(alpha_bar);
  const double gain = s0sq * a / (alpha_bar * s0sq + 1.0 - alpha_bar);
  return mu0 + gain * (x - a * mu0);
}

TiltMetrics tilt_metrics(const ExperimentConfig& config) {
  const NoiseSchedule s = config.schedule();
  const GaussianMixture prior = config.model_mixture();
  GmmScoreModel model(prior, s);
  const auto energy = config.energy(model.dim());
  const Condition c = config.condition();
  if (c.kind != Condition::Kind::kPoint) throw ConfigError("tilt comparison needs a point condition");
  const KeyValues& kv = config.values();
  const SamplerConfig guided = config.sampler();
  const double lambda = kv.get_double("oracle.lambda", guided.lambda);
  const int n_oracle = static_cast<int>(kv.get_int("oracle.samples", guided.n_chains));
  const int projections = static_cast<int>(kv.get_int("oracle.projections", 64));

  TiltMetrics m;
  m.oracle = tilted_gmm_oracle(prior, c.y, lambda);
  const Matrix oracle_a = sample_gmm(m.oracle, n_oracle, derive_seed(config.seed(), kTagOracleA));
  const Matrix oracle_b = sample_gmm(m.oracle, n_oracle, derive_seed(config.seed(), kTagOracleB));
  const std::uint64_t proj = derive_seed(config.seed(), kTagProjections);
  const Matrix xs = sample(guided, model, energy.get(), &c).valid_samples();
  const Matrix xu = sample(config.sampler("uncond"), model, nullptr, nullptr).valid_samples();
  m.sw_guided = sliced_wasserstein(xs, oracle_a, projections, proj);
  m.sw_self = sliced_wasserstein(oracle_b, oracle_a, projections, proj);
  m.sw_uncond = sliced_wasserstein(xu, oracle_a, projections, proj);
  return m;
}

InverseMetrics inverse_metrics(const ExperimentConfig& config) {
  const NoiseSchedule s = config.schedule();
  const GaussianMixture prior = config.model_mixture();
  if (prior.components() != 1) throw ConfigError("linear-inverse comparison needs a single-Gaussian prior");
  GmmScoreModel model(prior, s);
  const auto energy = config.energy(model.dim());
  const Condition c = config.condition();
  if (c.kind != Condition::Kind::kLinear) throw ConfigError("linear-inverse comparison needs a linear condition");
  const SamplerConfig exact = config.sampler("exact");
  const SamplerConfig ficd = config.sampler("ficd");
  if (exact.lambda <= 0.0) throw ConfigError("linear-inverse comparison needs sampler.lambda > 0");
  // exp(-lambda |A x - y|^2) is a Gaussian likelihood with variance 1 / (2 lambda).
  const GaussianPosterior post =
      linear_gaussian_posterior(prior.means[0], prior.covariances[0], c.a, c.y, 1.0 / (2.0 * exact.lambda));
  InverseMetrics m;
  m.oracle_mean = post.mean;
  m.oracle_covariance = post.covariance;
  m.mean_exact = mean_rows(sample(exact, model, energy.get(), &c).valid_samples());
  m.mean_ficd = mean_rows(sample(ficd, model, energy.get(), &c).valid_samples());
  m.err_exact = (m.mean_exact - post.mean).norm();
  m.err_ficd = (m.mean_ficd - post.mean).norm();
  return m;
}

PhaseMetrics phase_metrics(const ExperimentConfig& config) {
  const NoiseSchedule s = config.schedule();
  const auto model = config.model(s);
  const auto energy = config.energy(model->dim());
  const Condition c = config.condition();
  PhaseMetrics m;
  m.trace_exact = sample(config.sampler("exact"), *model, energy.get(), &c).trace;
  m.trace_ficd = sample(config.sampler("ficd"), *model, energy.get(), &c).trace;
  m.exact = phase_profile(m.trace_exact);
  m.ficd = phase_profile(m.trace_ficd);
  return m;
}

UncondMetrics uncond_metrics(const ExperimentConfig& config) {
  const NoiseSchedule s = config.schedule();
  const auto model = config.model(s);
  const Matrix xs = sample(config.sampler("uncond"), *model, nullptr, nullptr).valid_samples();
  UncondMetrics m;
  m.n = static_cast<int>(xs.rows());
  m.mean = mean_rows(xs);
  const Matrix centered = xs.rowwise() - m.mean.transpose();
  m.variance = centered.colwise().squaredNorm().transpose() / static_cast<double>(m.n - 1);
  m.standard_error = (m.variance / static_cast<double>(m.n)).cwiseSqrt();
  return m;
}

SpeedupMetrics speedup_metrics(const ExperimentConfig& config) {
  const NoiseSchedule s = config.schedule();
  const auto model = config.model(s);
  const auto energy = config.energy(model->dim());
  const Condition c = config.condition();
  const KeyValues& kv = config.values();
  const int reps = static_cast<int>(kv.get_int("bench.reps", 20));
  std::vector<Strategy> strategies;
  std::stringstream list(kv.get_string("bench.strategies", "ficd, exact"));
  for (std::string item; std::getline(list, item, ',');) {
    try {
      strategies.push_back(parse_strategy(trim(item)));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("key 'bench.strategies': ") + e.what());
    }
  }
  if (reps < 1) throw ConfigError("bench.reps must be >= 1");
  SpeedupMetrics m;
  m.rows = benchmark_steps(*model, strategies, *energy, c, config.sampler(), reps);
  const auto find = [&](const char* name) -> const BenchRow* {
    for (const BenchRow& r : m.rows) {
      if (r.strategy == name) return &r;
    }
    return nullptr;
  };
  const BenchRow* f = find("ficd");
  const BenchRow* e = find("exact");
  m.ratio = f && e ? f->median_run_s / e->median_run_s : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace ficd
