#include <doctest.h>

#include <cmath>
#include <limits>

#include "ficd/sampler.hpp"

using namespace ficd;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

FunctionScoreModel zero_score(NoiseSchedule s) {
  return FunctionScoreModel(2, std::move(s), [](const Vector&, int) -> Vector { return Vector::Zero(2); });
}

// Zero measurement operator: the energy gradient vanishes everywhere.
Condition null_measurement() { return Condition::linear(Matrix::Zero(1, 2), Vector::Zero(1)); }

SamplerConfig base_config(int n, Strategy s = Strategy::kFicd) {
  SamplerConfig c;
  c.strategy = s;
  c.n_chains = n;
  c.seed = 17;
  c.rho = {0.5};
  return c;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("unconditional Euler step with zero score") {
    const auto m = zero_score(NoiseSchedule::linear(1, 0.1, 0.1));
    const Vector x = v2(1.0, -2.0);
    CHECK((unconditional_step(m, x, 1, Vector::Zero(2)) - 1.05 * x).norm() < 1e-15);
  }

  TEST_CASE("tiny beta leaves x nearly unchanged") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::from_betas({1e-14}));
    const Vector x = v2(0.7, 0.1);
    CHECK((unconditional_step(m, x, 1, v2(1, 1)) - x).norm() < 1e-6);
  }

  TEST_CASE("guided step reduces to the unconditional step") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::isotropic({0.5, 0.5}, {v2(-1, 0), v2(1, 1)}, {0.3, 0.3}), s);
    QuadraticEnergy quad;
    LinearMeasurementEnergy lin;
    const Vector x = v2(0.2, -0.3), z = v2(0.5, 1.5);
    const Vector plain = unconditional_step(m, x, 20, z);
    for (Strategy st : {Strategy::kExact, Strategy::kFicd, Strategy::kMpgd, Strategy::kUnit}) {
      CHECK(guided_step(st, m, quad, x, 20, Condition::point(v2(3, 3)), 0.0, 1.0, z) == plain);
      CHECK(guided_step(st, m, lin, x, 20, null_measurement(), 0.7, 1.0, z) == plain);
    }
    CHECK(ficd_step(m, quad, x, 20, Condition::point(v2(3, 3)), 0.0, 1.0, z) == plain);
  }

  TEST_CASE("guided step subtracts rho times the conditional gradient") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 2.0), s);
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 1));
    const Vector x = v2(0.2, -0.3), z = v2(0.1, 0.2);
    const Vector want = unconditional_step(m, x, 30, z) - 0.3 * conditional_term_gradient(Strategy::kFicd, m, e, x, 30, c, 0.8);
    CHECK((guided_step(Strategy::kFicd, m, e, x, 30, c, 0.3, 0.8, z) - want).norm() < 1e-14);
  }

  TEST_CASE("one reverse step reproduces the VP marginal variance") {
    // s0^2 = 1 keeps every marginal standard normal.
    const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(1), 1.0), s);
    const int n = 10000;
    double sum = 0, sq = 0;
    for (int j = 0; j < n; ++j) {
      NoiseStream rng(99, static_cast<std::uint64_t>(j), 0);
      Vector x(1);
      x(0) = rng.normal();
      Vector z(1);
      z(0) = rng.normal();
      const double y = unconditional_step(m, x, 150, z)(0);
      sum += y;
      sq += y * y;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("DDIM step") {
    const DdimCoefficients c = ddim_coefficients(1.0, 1.0, 0.0);
    CHECK(c.j == 1.0);
    CHECK(c.m == 0.0);

    // Point mass at the origin: s = -x / (1 - ab). Deterministic DDIM moves x
    // to sqrt((1 - ab_{t-1}) / (1 - ab_t)) x.
    const NoiseSchedule s = NoiseSchedule::linear(20, 1e-3, 0.2);
    FunctionScoreModel m(2, s, [&s](const Vector& x, int t) -> Vector { return -x / (1.0 - s.alpha_bar(t)); });
    Vector x = v2(1.5, -0.5);
    for (int t = 20; t >= 2; --t) {
      const Vector next = ddim_step(m, x, t, 0.0, Vector::Zero(2));
      const double k = std::sqrt((1 - s.alpha_bar(t - 1)) / (1 - s.alpha_bar(t)));
      CHECK((next - k * x).norm() < 1e-12);
      CHECK(next.norm() < x.norm());
      x = next;
    }
  }

  TEST_CASE("renoise keeps unit variance on a standard normal") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 0.1, 0.1);
    const Vector r = renoise(s, v2(1, 0), 3, v2(0, 1));
    CHECK(r(0) == doctest::Approx(std::sqrt(0.9)));
    CHECK(r(1) == doctest::Approx(std::sqrt(0.1)));
  }

  TEST_CASE("time travel: r = 0 is one step, r = 2 is three") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.02);
    int calls = 0;
    const auto step = [&](const Vector& x) -> Vector {
      ++calls;
      return 0.5 * x;
    };
    NoiseStream rng(1, 0, 0);
    time_travel_wrap(step, s, v2(1, 1), 5, 0, rng);
    CHECK(calls == 1);
    calls = 0;
    NoiseStream a(1, 0, 0), b(1, 0, 0);
    const Vector ra = time_travel_wrap(step, s, v2(1, 1), 5, 2, a);
    CHECK(calls == 3);
    CHECK(ra == time_travel_wrap(step, s, v2(1, 1), 5, 2, b));
  }

  TEST_CASE("sampler trace rows follow time travel") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(12, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 0));
    SamplerConfig cfg = base_config(10);
    cfg.time_travel = {2, 5, 6};
    const SampleResult r = sample(cfg, m, &e, &c);
    CHECK(r.trace.rows.size() == 12 + 2 * 2);
    int at5 = 0;
    for (const TraceRow& row : r.trace.rows) at5 += row.t == 5;
    CHECK(at5 == 3);
    CHECK(cfg.travel_window(12) == std::pair<int, int>{5, 6});
    SamplerConfig mid;
    mid.time_travel.repeats = 1;
    CHECK(mid.travel_window(12) == std::pair<int, int>{5, 8});
  }

  TEST_CASE("all strategies agree bitwise when the energy gradient is zero") {
    GmmScoreModel m(GaussianMixture::isotropic({0.5, 0.5}, {v2(-1, 0), v2(1, 1)}, {0.3, 0.3}),
                    NoiseSchedule::linear(30, 1e-4, 0.02));
    LinearMeasurementEnergy e;
    const Condition c = null_measurement();
    SamplerConfig u = base_config(70);
    u.guidance = false;
    const Matrix ref = sample(u, m, nullptr, nullptr).samples;
    for (Strategy st : {Strategy::kExact, Strategy::kFicd, Strategy::kMpgd, Strategy::kUnit}) {
      CHECK(sample(base_config(70, st), m, &e, &c).samples == ref);
    }
  }

  TEST_CASE("thread count does not change samples") {
    GmmScoreModel m(GaussianMixture::isotropic({0.5, 0.5}, {v2(-1, 0), v2(1, 1)}, {0.3, 0.3}),
                    NoiseSchedule::linear(40, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(0, 1));
    for (Strategy st : {Strategy::kExact, Strategy::kFicd}) {
      SamplerConfig a = base_config(300, st);
      a.time_travel.repeats = 1;
      SamplerConfig b = a;
      a.threads = 1;
      b.threads = 8;
      const SampleResult ra = sample(a, m, &e, &c), rb = sample(b, m, &e, &c);
      CHECK(ra.samples == rb.samples);
      REQUIRE(ra.trace.rows.size() == rb.trace.rows.size());
      for (std::size_t i = 0; i < ra.trace.rows.size(); ++i) CHECK(ra.trace.rows[i].grad_norm == rb.trace.rows[i].grad_norm);
    }
  }

  TEST_CASE("trace counts per chain") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(15, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 0));
    for (Strategy st : {Strategy::kExact, Strategy::kFicd}) {
      SamplerConfig cfg = base_config(50, st);
      const SampleResult r = sample(cfg, m, &e, &c);
      CHECK(r.counts.score_evals == 15u * 50u);
      CHECK(r.counts.jacobian_passes == (st == Strategy::kExact ? 15u * 50u : 0u));
      for (const TraceRow& row : r.trace.rows) {
        CHECK(row.score_evals == 1.0);
        CHECK(row.jacobian_passes == (st == Strategy::kExact ? 1.0 : 0.0));
        CHECK(row.cr_bound == doctest::Approx(1.0 / (1.0 - m.schedule().alpha_bar(row.t))));
        CHECK(std::isnan(row.fisher_spectral_radius));
      }
      cfg.reuse_score = false;
      CHECK(sample(cfg, m, &e, &c).counts.score_evals == 2u * 15u * 50u);
    }
  }

  TEST_CASE("Fisher tracing reports the analytic radius") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(8, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 0));
    SamplerConfig cfg = base_config(5);
    cfg.trace_fisher = true;
    for (const TraceRow& row : sample(cfg, m, &e, &c).trace.rows)
      CHECK(row.fisher_spectral_radius == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("non-finite chains are flagged, and too many abort the run") {
    const NoiseSchedule s = NoiseSchedule::linear(5, 1e-4, 0.02);
    const auto nan_beyond = [](double r) {
      return [r](const Vector& x, int) -> Vector {
        if (std::abs(x(0)) > r) return Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
        return -x;
      };
    };
    SamplerConfig cfg = base_config(2000);
    cfg.guidance = false;
    FunctionScoreModel few(2, s, nan_beyond(3.2));
    const SampleResult r = sample(cfg, few, nullptr, nullptr);
    CHECK(r.failed_count() > 0);
    CHECK(r.failed_count() <= 20);
    CHECK(r.valid_samples().rows() == 2000 - r.failed_count());
    CHECK(r.valid_samples().allFinite());
    for (int i = 0; i < 2000; ++i)
      if (r.failed[static_cast<std::size_t>(i)]) CHECK(r.failed_at[static_cast<std::size_t>(i)] >= 1);
    FunctionScoreModel many(2, s, nan_beyond(2.0));
    CHECK_THROWS_AS(sample(cfg, many, nullptr, nullptr), ChainFailure);
  }

  TEST_CASE("rho schedules") {
    const NoiseSchedule s = NoiseSchedule::linear(4, 0.1, 0.4);
    SamplerConfig c;
    c.rho = {2.0};
    CHECK(c.rho_at(s, 3) == 2.0);
    c.rho_scaling = RhoScaling::kBeta;
    CHECK(c.rho_at(s, 3) == doctest::Approx(2.0 * s.beta(3)));
    c.rho = {1, 2, 3, 4};
    c.rho_scaling = RhoScaling::kConstant;
    CHECK(c.rho_at(s, 2) == 2.0);
    c.validate(4);
    CHECK_THROWS_AS(c.validate(5), InvalidArgument);
  }

  TEST_CASE("configuration validation") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(5, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 0));
    SamplerConfig cfg = base_config(0);
    CHECK_THROWS_AS(sample(cfg, m, &e, &c), InvalidArgument);
    cfg = base_config(4);
    cfg.rho = {-1.0};
    CHECK_THROWS_AS(sample(cfg, m, &e, &c), InvalidArgument);
    cfg = base_config(4);
    CHECK_THROWS_AS(sample(cfg, m, nullptr, nullptr), InvalidArgument);
    const Condition wrong = Condition::point(Vector::Zero(3));
    CHECK_THROWS_AS(sample(cfg, m, &e, &wrong), InvalidArgument);
  }

  TEST_CASE("DDIM sampler runs and is deterministic at eta = 0") {
    GmmScoreModel m(GaussianMixture::single(Vector::Ones(2), 0.5), NoiseSchedule::linear(30, 1e-4, 0.02));
    SamplerConfig cfg = base_config(20);
    cfg.guidance = false;
    cfg.discretization = Discretization::kDdim;
    const Matrix a = sample(cfg, m, nullptr, nullptr).samples;
    CHECK(a.allFinite());
    cfg.seed = 18;
    CHECK(sample(cfg, m, nullptr, nullptr).samples != a);
  }
}
