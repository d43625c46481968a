#include <doctest.h>

#include <cmath>

#include "ficd/schedule.hpp"

using namespace ficd;

TEST_SUITE("schedule") {
  TEST_CASE("single-step and two-step products") {
    const NoiseSchedule one = NoiseSchedule::linear(1, 0.02, 0.02);
    CHECK(one.alpha_bar(1) == doctest::Approx(0.98).epsilon(1e-15));
    const NoiseSchedule two = NoiseSchedule::linear(2, 0.1, 0.3);
    CHECK(two.alpha_bar(2) == doctest::Approx(0.63).epsilon(1e-15));
    CHECK(two.beta(1) == 0.1);
    CHECK(two.beta(2) == doctest::Approx(0.3).epsilon(1e-15));
  }

  TEST_CASE("empty product at t = 0") {
    for (int T : {1, 7, 1000}) CHECK(NoiseSchedule::linear(T, 1e-4, 0.02).alpha_bar(0) == 1.0);
  }

  TEST_CASE("T = 1000 linear schedule matches a 50-digit cumulative product") {
    // mpmath, dps = 50.
    const NoiseSchedule s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    CHECK(s.alpha_bar(1000) == doctest::Approx(4.0358297653756833148e-5).epsilon(1e-12));
    CHECK(s.alpha_bar(500) == doctest::Approx(0.078587242881778237343).epsilon(1e-13));
  }

  TEST_CASE("T = 200 schedule used by the presets") {
    const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 0.02);
    CHECK(s.alpha_bar(100) == doctest::Approx(0.60248030530770522028).epsilon(1e-13));
    CHECK(s.alpha_bar(200) == doctest::Approx(0.1321827542506177897).epsilon(1e-13));
  }

  TEST_CASE("alpha_bar is strictly decreasing") {
    const NoiseSchedule s = NoiseSchedule::cosine(100);
    for (int t = 1; t <= 100; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }

  TEST_CASE("DDIM coefficients") {
    DdimCoefficients c = ddim_coefficients(0.63, 0.9, 0.0);
    CHECK(c.j == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(c.m == doctest::Approx(-0.41080141398313192456).epsilon(1e-14));
    CHECK(c.m == doctest::Approx(std::sqrt(0.1) - std::sqrt(0.9) / std::sqrt(0.63) * std::sqrt(0.37)));
    c = ddim_coefficients(0.5, 0.5, 0.0);
    CHECK(c.j == 1.0);
  }

  TEST_CASE("DDIM sigma") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    CHECK(ddim_sigma(s, 25, 0.0) == 0.0);
    // eta = 1 is the DDPM posterior standard deviation.
    const double ab = s.alpha_bar(25), prev = s.alpha_bar(24);
    CHECK(ddim_sigma(s, 25, 1.0) ==
          doctest::Approx(std::sqrt((1 - prev) / (1 - ab) * (1 - ab / prev))).epsilon(1e-14));
  }

  TEST_CASE("invalid schedules and indices") {
    CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), InvalidArgument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 1e-4, 1.5), InvalidArgument);
    CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.2}), InvalidArgument);
    CHECK_THROWS_AS(NoiseSchedule::from_betas({}), InvalidArgument);
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.alpha_bar(11), InvalidArgument);
    CHECK_THROWS_AS(s.alpha_bar(-1), InvalidArgument);
    CHECK_THROWS_AS(s.beta(0), InvalidArgument);
  }

  TEST_CASE("spec round trip is bit-exact") {
    const NoiseSchedule s = NoiseSchedule::linear(123, 3e-4, 0.03);
    const NoiseSchedule r = NoiseSchedule::from_spec(s.spec());
    for (int t = 1; t <= 123; ++t) CHECK(r.beta(t) == s.beta(t));
  }
}
