#include <doctest.h>

#include <sstream>

#include "ficd/kv.hpp"
#include "ficd/serialize.hpp"

using namespace ficd;

TEST_SUITE("serialize") {
  TEST_CASE("doubles survive text") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 4.0358297653756833e-5})
      CHECK(parse_double(format_double(v)) == v);
    CHECK_THROWS_AS(parse_double("1.0x"), InvalidArgument);
  }

  TEST_CASE("key-value documents") {
    const KeyValues kv = KeyValues::parse("# comment\na.b = 1, 2 ; 3, 4\nc = yes\nc = false\n");
    CHECK(kv.get_matrix("a.b") == (Matrix(2, 2) << 1, 2, 3, 4).finished());
    CHECK_FALSE(kv.get_bool("c", true));
    CHECK(kv.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(kv.at("missing"), ConfigError);
    CHECK_THROWS_AS(KeyValues::parse("no equals sign"), ConfigError);
    CHECK_THROWS_AS(kv.get_double("a.b", 0), ConfigError);
    CHECK(KeyValues::parse(kv.to_string()).entries() == kv.entries());
  }

  TEST_CASE("schedule records") {
    KeyValues kv;
    const NoiseSchedule s = NoiseSchedule::linear(77, 3e-4, 0.025);
    write_schedule(kv, "schedule", s);
    const NoiseSchedule r = read_schedule(KeyValues::parse(kv.to_string()), "schedule");
    CHECK(r.steps() == 77);
    for (int t = 1; t <= 77; ++t) CHECK(r.beta(t) == s.beta(t));
  }

  TEST_CASE("mixture records") {
    GaussianMixture g = GaussianMixture::isotropic({0.25, 0.75}, {Vector::Ones(2), -Vector::Ones(2)}, {0.5, 2.0});
    g.covariances[1](0, 1) = g.covariances[1](1, 0) = 0.3;
    KeyValues kv;
    write_gmm(kv, "model", g);
    const GaussianMixture r = read_gmm(KeyValues::parse(kv.to_string()), "model");
    CHECK(r.weights == g.weights);
    for (int i = 0; i < 2; ++i) {
      CHECK(r.means[i] == g.means[i]);
      CHECK(r.covariances[i] == g.covariances[i]);
    }
  }

  TEST_CASE("condition records") {
    Matrix a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    for (const Condition& c : {Condition::point(Vector::Ones(3)), Condition::linear(a, Vector::Ones(2)),
                               Condition::reference_features(a)}) {
      KeyValues kv;
      write_condition(kv, "condition", c);
      const Condition r = read_condition(kv, "condition");
      CHECK(r.kind == c.kind);
      CHECK(r.y == c.y);
      CHECK(r.a == c.a);
      CHECK(r.features == c.features);
    }
  }

  TEST_CASE("samples CSV round trip") {
    Matrix s(3, 2);
    s << 0.1, -0.2, 1.0 / 3.0, 5e-12, -7, 8;
    std::stringstream io;
    write_samples_csv(io, s, {0, 1, 2});
    CHECK(io.str().rfind("chain_id,dim_0,dim_1\n", 0) == 0);
    CHECK(read_points_csv(io) == s);
    std::istringstream bare("1,2\n3,4\n");
    CHECK(read_points_csv(bare) == (Matrix(2, 2) << 1, 2, 3, 4).finished());
    std::istringstream ragged("1,2\n3\n");
    CHECK_THROWS(read_points_csv(ragged));
  }

  TEST_CASE("trace CSV header") {
    RunTrace tr;
    tr.rows.push_back({.t = 5, .grad_norm = 1.5, .cr_bound = 2, .coefficient_used = 3, .score_evals = 1});
    std::ostringstream out;
    write_trace_csv(out, tr);
    const std::string text = out.str();
    CHECK(text.rfind("t,grad_norm,fisher_spectral_radius,cr_bound,coefficient_used,step_wall_time_s,score_evals,"
                     "jacobian_passes\n",
                     0) == 0);
    CHECK(text.find("\n5,1.5,nan,2,3,") != std::string::npos);
  }

  TEST_CASE("missing files") {
    CHECK_THROWS_AS(read_file("/no/such/file"), IoError);
    CHECK_THROWS_AS(write_file("/no/such/dir/file", "x"), IoError);
  }
}
