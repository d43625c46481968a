#include <doctest.h>

#include <cmath>
#include <set>

#include "ficd/random.hpp"

using namespace ficd;

TEST_SUITE("random") {
  TEST_CASE("Philox4x32-10 known answers") {
    // Reference vectors distributed with Random123.
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("substream ids are distinct") {
    std::set<std::uint32_t> seen;
    for (int t = 0; t <= 1000; t += 37)
      for (int r = 0; r < 4; ++r)
        for (auto p : {StreamPurpose::kInit, StreamPurpose::kStep, StreamPurpose::kTimeTravel, StreamPurpose::kAux})
          CHECK(seen.insert(substream_id(t, r, p)).second);
    CHECK_THROWS_AS(substream_id(1, 256, StreamPurpose::kStep), InvalidArgument);
  }

  TEST_CASE("streams are reproducible and separated") {
    NoiseStream a(42, 3, 7), b(42, 3, 7), c(42, 4, 7), d(43, 3, 7);
    for (int i = 0; i < 10; ++i) {
      const double x = a.normal();
      CHECK(x == b.normal());
      CHECK(x != c.normal());
      CHECK(x != d.normal());
    }
    CHECK(derive_seed(1, 1) != derive_seed(1, 2));
    CHECK(derive_seed(1, 1) != derive_seed(2, 1));
    CHECK(derive_seed(1, 1) == derive_seed(1, 1));
  }

  TEST_CASE("uniform and normal moments") {
    NoiseStream s(9, 0, 0);
    const int n = 200000;
    double um = 0, nm = 0, nv = 0, lo = 1, hi = 0;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform();
      lo = std::min(lo, u);
      hi = std::max(hi, u);
      um += u;
    }
    for (int i = 0; i < n; ++i) {
      const double z = s.normal();
      nm += z;
      nv += z * z;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(um / n == doctest::Approx(0.5).epsilon(0.005));
    CHECK(std::abs(nm / n) < 5.0 / std::sqrt(n));
    CHECK(nv / n == doctest::Approx(1.0).epsilon(0.015));
  }

  TEST_CASE("below stays in range") {
    NoiseStream s(1, 1, 1);
    for (int i = 0; i < 1000; ++i) CHECK(s.below(7) < 7u);
  }
}
