#include <doctest.h>

#include <cmath>

#include "ficd/guidance.hpp"
#include "ficd/random.hpp"

using namespace ficd;

namespace {

NoiseSchedule single_step(double ab) { return NoiseSchedule::from_betas({1.0 - ab}); }

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

double fd_error(const EnergyFunction& e, const Condition& c, const Vector& x) {
  const double h = 1e-5;
  Vector fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector p = x, m = x;
    p(i) += h;
    m(i) -= h;
    fd(i) = (e.value(p, c) - e.value(m, c)) / (2 * h);
  }
  const Vector g = e.grad(x, c);
  return (g - fd).norm() / std::max(1.0, g.norm());
}

}  // namespace

TEST_SUITE("guidance") {
  TEST_CASE("quadratic energy") {
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(0, 0));
    CHECK(e.value(v2(0, 0), c) == 0.0);
    CHECK(e.grad(v2(0, 0), c).norm() == 0.0);
    CHECK(e.value(v2(1, 0), c) == 1.0);
    CHECK(e.grad(v2(1, 0), c) == v2(2, 0));
  }

  TEST_CASE("distance energy has unit gradient away from c") {
    DistanceEnergy e;
    const Condition c = Condition::point(v2(1, -1));
    NoiseStream rng(2, 0, 0);
    for (int i = 0; i < 50; ++i) {
      const Vector x = 3.0 * rng.normal_vector(2);
      CHECK(e.grad(x, c).norm() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(fd_error(e, c, x) < 1e-8);
    }
    CHECK(e.grad(v2(1, -1), c).norm() == 0.0);
    CHECK(*e.lipschitz_bound() == 1.0);
  }

  TEST_CASE("linear measurement energy") {
    LinearMeasurementEnergy e;
    const Vector x = v2(2, 3);
    CHECK(e.value(x, Condition::linear(Matrix::Identity(2, 2), x)) == 0.0);
    Matrix a(1, 2);
    a << 1, 0;
    const Condition c = Condition::linear(a, Vector::Zero(1));
    CHECK(e.value(x, c) == 4.0);
    CHECK(e.grad(x, c) == v2(4, 0));

    NoiseStream rng(3, 0, 0);
    Matrix a3(3, 2);
    for (int i = 0; i < 3; ++i) a3.row(i) = rng.normal_vector(2).transpose();
    const Condition c3 = Condition::linear(a3, rng.normal_vector(3));
    for (int k = 0; k < 20; ++k) CHECK(fd_error(e, c3, rng.normal_vector(2)) < 1e-8);
    CHECK_THROWS_AS(e.check(c3, 3), InvalidArgument);
  }

  TEST_CASE("Gram energy") {
    GramEnergy e(LinearFeatureMap::reshape(2, 1));
    Matrix f(1, 2);
    f << 1, 0;
    CHECK(e.value(v2(1, 0), Condition::reference_features(f)) == 0.0);
    Matrix ref(1, 2);
    ref << 0, 1;
    CHECK(std::abs(e.value(v2(1, 0), Condition::reference_features(ref))) < 1e-15);

    NoiseStream rng(4, 0, 0);
    LinearFeatureMap map;
    map.rows = 2;
    map.cols = 3;
    map.w = Matrix(6, 4);
    for (int i = 0; i < 6; ++i) map.w.row(i) = rng.normal_vector(4).transpose();
    GramEnergy g(map);
    Matrix target(2, 3);
    for (int i = 0; i < 2; ++i) target.row(i) = rng.normal_vector(3).transpose();
    const Condition c = Condition::reference_features(target);
    g.check(c, 4);
    for (int k = 0; k < 20; ++k) CHECK(fd_error(g, c, rng.normal_vector(4)) < 1e-6);
  }

  TEST_CASE("conditional term is zero where the energy gradient is zero") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), NoiseSchedule::linear(20, 1e-4, 0.02));
    QuadraticEnergy e;
    const Vector x = v2(0.3, -0.2);
    const Condition c = Condition::point(tweedie_posterior_mean(m, x, 10));
    for (Strategy s : {Strategy::kExact, Strategy::kFicd, Strategy::kMpgd, Strategy::kUnit})
      CHECK(conditional_term_gradient(s, m, e, x, 10, c, 1.0).norm() < 1e-15);
  }

  TEST_CASE("FICD coefficient 4 at alpha_bar 0.25") {
    FunctionScoreModel m(2, single_step(0.25), [](const Vector&, int) -> Vector { return Vector::Zero(2); });
    QuadraticEnergy e;
    // x0 = x / 0.5 = (0.5, 0), so the energy gradient is (1, 0).
    const Vector g = conditional_term_gradient(Strategy::kFicd, m, e, v2(0.25, 0), 1, Condition::point(v2(0, 0)), 1.0);
    CHECK((g - v2(4, 0)).norm() < 1e-15);
  }

  TEST_CASE("EXACT on a standard normal prior scales by 0.5 at alpha_bar 0.25") {
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), single_step(0.25));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(1, 2));
    const Vector x = v2(-0.4, 0.9);
    const Vector g = e.grad(tweedie_posterior_mean(m, x, 1), c);
    const Vector got = conditional_term_gradient(Strategy::kExact, m, e, x, 1, c, 1.0);
    CHECK((got - 0.5 * g).norm() < 1e-14);
  }

  TEST_CASE("EXACT batch matches the dense Jacobian on a mixture") {
    GaussianMixture gmm = GaussianMixture::isotropic({0.4, 0.6}, {v2(-2, 0), v2(2, 1)}, {0.5, 0.3});
    GmmScoreModel m(gmm, NoiseSchedule::linear(50, 1e-4, 0.02));
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(0, 1));
    NoiseStream rng(8, 0, 0);
    for (int k = 0; k < 10; ++k) {
      const Vector x = rng.normal_vector(2);
      const double lambda = 0.7;
      const Vector got = conditional_term_gradient(Strategy::kExact, m, e, x, 25, c, lambda);
      const Vector want =
          posterior_jacobian_exact(m, x, 25).transpose() * (lambda * e.grad(tweedie_posterior_mean(m, x, 25), c));
      CHECK((got - want).norm() < 1e-12);
    }
  }

  TEST_CASE("FICD gradient dominates EXACT at early t on the Gaussian task") {
    // J = -I/S with S = ab s0^2 + 1 - ab, so the exact posterior part is
    // (1 - (1-ab)/S)/sqrt(ab) < 2/sqrt(ab).
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    GmmScoreModel m(GaussianMixture::single(Vector::Zero(2), 1.0), s);
    QuadraticEnergy e;
    const Condition c = Condition::point(v2(2, -1));
    for (int t = 70; t <= 100; t += 10) {
      const Vector x = v2(0.5, 0.5);
      CHECK(guidance_gradient_norm(conditional_term_gradient(Strategy::kFicd, m, e, x, t, c, 1.0)) >
            guidance_gradient_norm(conditional_term_gradient(Strategy::kExact, m, e, x, t, c, 1.0)));
    }
  }

  TEST_CASE("gradient norm") {
    CHECK(guidance_gradient_norm(v2(3, 4)) == 5.0);
    CHECK(guidance_gradient_norm(Vector::Zero(3)) == 0.0);
  }

  TEST_CASE("energy factory") {
    CHECK(make_energy("quadratic", 2)->name() == "quadratic");
    CHECK(make_energy("distance", 2)->name() == "distance");
    CHECK(make_energy("linear", 2)->name() == "linear");
    CHECK(make_energy("gram", 4)->name() == "gram");
    CHECK_THROWS(make_energy("clip", 2));
  }
}
