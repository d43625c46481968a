#include <doctest.h>

#include <cmath>

#include "ficd/analytics.hpp"

using namespace ficd;

namespace {
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }
}  // namespace

TEST_SUITE("analytics") {
  TEST_CASE("conjugate linear-Gaussian posterior") {
    const GaussianPosterior p =
        linear_gaussian_posterior(Vector::Zero(2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), v2(1, 1), 1.0);
    CHECK((p.mean - v2(0.5, 0.5)).norm() < 1e-15);
    CHECK((p.covariance - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-15);

    const Vector mu = v2(0.3, -1);
    Matrix s0(2, 2);
    s0 << 2, 0.5, 0.5, 1;
    const GaussianPosterior wide = linear_gaussian_posterior(mu, s0, Matrix::Identity(2, 2), v2(5, 5), 1e12);
    CHECK((wide.mean - mu).norm() < 1e-9);
    CHECK((wide.covariance - s0).norm() < 1e-9);
    const GaussianPosterior blind = linear_gaussian_posterior(mu, s0, Matrix::Zero(1, 2), Vector::Ones(1), 1.0);
    CHECK((blind.mean - mu).norm() < 1e-15);
    CHECK((blind.covariance - s0).norm() < 1e-15);
  }

  TEST_CASE("tilted mixture oracle") {
    const GaussianMixture g = GaussianMixture::isotropic({0.3, 0.7}, {v2(-2, 0), v2(2, 1)}, {0.5, 0.8});
    const GaussianMixture same = tilted_gmm_oracle(g, v2(0, 1), 0.0);
    for (int i = 0; i < 2; ++i) {
      CHECK(same.weights[i] == doctest::Approx(g.weights[i]));
      CHECK((same.means[i] - g.means[i]).norm() < 1e-15);
      CHECK((same.covariances[i] - g.covariances[i]).norm() < 1e-15);
    }
    const GaussianMixture one = tilted_gmm_oracle(GaussianMixture::single(Vector::Zero(1), 1.0), Vector::Zero(1), 0.5);
    CHECK(one.covariances[0](0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(one.means[0](0) == 0.0);
    const GaussianMixture sharp = tilted_gmm_oracle(g, v2(0.5, 1), 1e8);
    for (const Vector& m : sharp.means) CHECK((m - v2(0.5, 1)).norm() < 1e-6);
    double w = 0;
    for (double x : tilted_gmm_oracle(g, v2(0, 1), 0.25).weights) w += x;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("sample_gmm matches its moments") {
    const Matrix x = sample_gmm(GaussianMixture::single(v2(1, -2), 0.25), 20000, 4);
    CHECK(x.rows() == 20000);
    CHECK((x.colwise().mean().transpose() - v2(1, -2)).norm() < 0.02);
    CHECK(sample_gmm(GaussianMixture::single(v2(1, -2), 0.25), 10, 4) == x.topRows(10));
  }

  TEST_CASE("Wasserstein distances") {
    CHECK(wasserstein_1d({0.0}, {1.0}) == 1.0);
    CHECK(wasserstein_1d({0.0, 1.0}, {0.5}) == doctest::Approx(0.5));
    CHECK(wasserstein_1d({3, 1, 2}, {1, 2, 3}) == 0.0);
    const Matrix a = sample_gmm(GaussianMixture::single(Vector::Zero(2), 1.0), 500, 1);
    CHECK(sliced_wasserstein(a, a, 64, 0) == 0.0);
    Matrix p0 = Matrix::Zero(1, 1), p1 = Matrix::Ones(1, 1);
    CHECK(sliced_wasserstein(p0, p1, 16, 0) == doctest::Approx(1.0).epsilon(1e-15));
    const Matrix x = sample_gmm(GaussianMixture::single(Vector::Zero(2), 1.0), 5000, 11);
    const Matrix y = sample_gmm(GaussianMixture::single(Vector::Zero(2), 1.0), 5000, 12);
    CHECK(sliced_wasserstein(x, y, 64, 3) < 0.05);
    CHECK(sliced_wasserstein(x, y, 64, 3) == sliced_wasserstein(y, x, 64, 3));
  }

  TEST_CASE("Cramer-Rao bound verification on Gaussians") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    Matrix grid(5, 2);
    grid << 0, 0, 1, 1, -2, 0.5, 3, -3, 0.1, 2;
    const std::vector<int> ts = {1, 25, 50, 75, 100};
    double prev_max = 0.0;
    for (double v : {4.0, 1.0, 0.25, 0.01}) {
      GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), v), s);
      const BoundReport r = bound_verification(m, grid, ts);
      CHECK(r.violations == 0);
      CHECK(r.max_ratio <= 1.0);
      CHECK(r.max_ratio > prev_max);
      prev_max = r.max_ratio;
      for (const BoundSample& b : r.samples) {
        const double ab = s.alpha_bar(b.t);
        CHECK(b.spectral_radius == doctest::Approx(1.0 / (ab * v + 1.0 - ab)).epsilon(1e-12));
        if (v == 1.0) CHECK(b.ratio == doctest::Approx(1.0 - ab).epsilon(1e-12));
      }
    }
    CHECK(prev_max > 0.99);
  }

  TEST_CASE("bimodal ratios are recorded") {
    const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::isotropic({0.5, 0.5}, {v2(-5, 0), v2(5, 0)}, {1, 1}), s);
    Matrix grid(3, 2);
    grid << 0, 0, 1, 0, 4, 1;
    const BoundReport r = bound_verification(m, grid, {100});
    CHECK(r.samples.size() == 3);
    CHECK(r.violation_rate() >= 0.0);
  }

  TEST_CASE("phase profile") {
    RunTrace tr;
    for (int t = 9; t >= 1; --t) tr.rows.push_back({.t = t, .grad_norm = 2.0});
    PhaseProfile p = phase_profile(tr);
    CHECK(p.early == 2.0);
    CHECK(p.mid == 2.0);
    CHECK(p.late == 2.0);
    RunTrace three;
    for (int t = 3; t >= 1; --t) three.rows.push_back({.t = t, .grad_norm = static_cast<double>(t)});
    p = phase_profile(three);
    CHECK(p.early == 3.0);
    CHECK(p.mid == 2.0);
    CHECK(p.late == 1.0);
    CHECK_THROWS_AS(phase_profile(RunTrace{}), InvalidArgument);
  }

  TEST_CASE("deviation bound arithmetic") {
    CHECK(deviation_bound(0.1, 1.0, 0.25, 0.36) == doctest::Approx(0.14).epsilon(1e-14));
    CHECK(deviation_bound_tight(0.1, 1.0, 0.25, 0.36) == doctest::Approx(0.1 * (4.0 - 0.6)).epsilon(1e-14));
  }

  TEST_CASE("deviation is zero when the energy gradient is zero") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(20, 1e-4, 0.02));
    LinearMeasurementEnergy e;
    const Condition c = Condition::linear(Matrix::Zero(1, 2), Vector::Zero(1));
    const DeviationReport r = deviation_bound_check(m, e, c, DeviationSetup{});
    CHECK(r.steps.size() == 20);
    for (const DeviationStep& s : r.steps) {
      CHECK(s.max_deviation == 0.0);
      CHECK(s.pass);
    }
  }

  TEST_CASE("distance-energy deviation sits exactly on the tight bound") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(100, 1e-4, 0.02));
    DistanceEnergy e;
    const DeviationReport r = deviation_bound_check(m, e, Condition::point(v2(2, -1)), DeviationSetup{});
    for (const DeviationStep& s : r.steps) CHECK(s.max_deviation == doctest::Approx(s.exact_bound).epsilon(1e-12));
  }

  TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK_THROWS_AS(median({}), InvalidArgument);
  }
}
