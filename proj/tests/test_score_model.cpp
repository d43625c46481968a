#include <doctest.h>

#include <cmath>

#include "ficd/random.hpp"
#include "ficd/score_model.hpp"

using namespace ficd;

namespace {

// One step whose alpha_bar equals ab.
NoiseSchedule single_step(double ab) { return NoiseSchedule::from_betas({1.0 - ab}); }

GaussianMixture anisotropic() {
  GaussianMixture g;
  g.weights = {0.3, 0.7};
  g.means = {Vector::Constant(2, -1.0), (Vector(2) << 1.5, 0.5).finished()};
  Matrix c1(2, 2), c2(2, 2);
  c1 << 0.5, 0.2, 0.2, 0.8;
  c2 << 1.2, -0.3, -0.3, 0.4;
  g.covariances = {c1, c2};
  return g;
}

}  // namespace

TEST_SUITE("score_model") {
  TEST_CASE("standard normal score at alpha_bar = 0.5") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), single_step(0.5));
    const Vector s = m.score((Vector(2) << 2, 0).finished(), 1);
    CHECK(s(0) == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(s(1) == doctest::Approx(0.0));
  }

  TEST_CASE("standard normal data score is -x") {
    const NoiseSchedule s = single_step(1.0 - 1e-12);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(3), 1.0), s);
    const Vector x = (Vector(3) << 0.3, -1.2, 2.0).finished();
    CHECK((m.score(x, 1) + x).norm() < 1e-12);
    CHECK((m.score(x, 0) + x).norm() < 1e-14);
  }

  TEST_CASE("symmetric mixture has zero score at the origin") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    const Vector mu = (Vector(2) << 2, 1).finished();
    GmmScoreModel m(GaussianMixture::isotropic({0.5, 0.5}, {mu, -mu}, {0.5, 0.5}), s);
    for (int t : {0, 1, 50, 100}) CHECK(m.score(Vector::Zero(2), t).norm() < 1e-15);
  }

  TEST_CASE("Gaussian Hessian is -(ab s0^2 + 1 - ab)^-1 I") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    for (double v : {0.25, 1.0, 4.0}) {
      GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), v), s);
      for (int t : {1, 30, 100}) {
        const double ab = s.alpha_bar(t);
        const Matrix j = m.jacobian((Vector(2) << 0.4, -3.0).finished(), t);
        const Matrix want = -Matrix::Identity(2, 2) / (ab * v + 1.0 - ab);
        CHECK((j - want).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("analytic Jacobian agrees with central differences") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    GmmScoreModel m(anisotropic(), s);
    NoiseStream rng(5, 0, 0);
    for (int k = 0; k < 100; ++k) {
      const Vector x = 2.0 * rng.normal_vector(2);
      const int t = 1 + static_cast<int>(rng.below(100));
      const Matrix a = m.jacobian(x, t);
      const Matrix fd = finite_diff_jacobian(m, x, t, 1e-4);
      CHECK((a - fd).norm() / a.norm() < 1e-5);
      CHECK((a - a.transpose()).norm() < 1e-12);
    }
  }

  TEST_CASE("finite differences of simple functions") {
    const auto lin = [](const Vector& x) -> Vector { return -x; };
    const auto cst = [](const Vector& x) -> Vector { return Vector::Constant(x.size(), 3.0); };
    const Vector x = (Vector(3) << 1, 2, 3).finished();
    for (double h : {1e-2, 1e-4, 1e-6}) {
      CHECK((finite_diff_jacobian(lin, x, h) + Matrix::Identity(3, 3)).norm() < 1e-9);
      CHECK(finite_diff_jacobian(cst, x, h).norm() == 0.0);
    }
  }

  TEST_CASE("eps and score conversions") {
    const NoiseSchedule s = single_step(0.75);
    CHECK(eps_to_score(Vector::Zero(2), s, 1).norm() == 0.0);
    const Vector sc = eps_to_score((Vector(2) << 1, 0).finished(), s, 1);
    CHECK(sc(0) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(sc(1) == 0.0);
    const Vector v = (Vector(3) << 0.1, -2, 5).finished();
    CHECK((eps_to_score(score_to_eps(v, s, 1), s, 1) - v).norm() < 1e-14);
  }

  TEST_CASE("counters") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), s);
    m.score_batch(Matrix::Zero(2, 5), 3);
    m.score(Vector::Zero(2), 3);
    CHECK(m.counts().score_evals == 6);
    auto tape = m.record(Matrix::Zero(2, 4), 3);
    tape->vjp(Matrix::Ones(2, 4));
    CHECK(m.counts().score_evals == 10);
    CHECK(m.counts().jacobian_passes == 4);
    m.reset_counts();
    CHECK(m.counts().score_evals == 0);
  }

  TEST_CASE("tape VJP equals J^T v") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    GmmScoreModel m(anisotropic(), s);
    NoiseStream rng(1, 0, 0);
    Matrix xs(2, 3), v(2, 3);
    for (int j = 0; j < 3; ++j) {
      xs.col(j) = rng.normal_vector(2);
      v.col(j) = rng.normal_vector(2);
    }
    const Matrix out = m.record(xs, 20)->vjp(v);
    for (int j = 0; j < 3; ++j) CHECK((out.col(j) - m.jacobian(xs.col(j), 20).transpose() * v.col(j)).norm() < 1e-12);
  }

  TEST_CASE("input validation") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), s);
    CHECK_THROWS_AS(m.score(Vector::Zero(3), 1), InvalidArgument);
    CHECK_THROWS_AS(m.score(Vector::Zero(2), 11), InvalidArgument);
    GaussianMixture bad = GaussianMixture::single(Vector::Zero(2), 1.0);
    bad.covariances[0](0, 0) = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(GaussianMixture::isotropic({0.5, 0.6}, {Vector::Zero(1), Vector::Zero(1)}, {1, 1}).validate(),
                    InvalidArgument);
  }
}
