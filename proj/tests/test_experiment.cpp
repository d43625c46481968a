#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ficd/experiment.hpp"
#include "ficd/serialize.hpp"
#include "ficd/verify.hpp"

using namespace ficd;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("ficd-test-" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("every preset builds its objects") {
    const std::vector<std::string> expected = {"bench-mlp", "gaussian-point", "gmm-style-analog", "gmm-tilt",
                                               "linear-inverse"};
    REQUIRE(builtin_presets().size() == expected.size());
    for (const std::string& name : expected) {
      ExperimentConfig c;
      c.apply_preset(name);
      const NoiseSchedule s = c.schedule();
      CHECK(s.steps() == 200);
      const SamplerConfig sc = c.sampler();
      sc.validate(s.steps());
      if (c.values().get_string("model.kind", "") == "gmm") {
        const auto m = c.model(s);
        const auto e = c.energy(m->dim());
        e->check(c.condition(), m->dim());
      }
    }
  }

  TEST_CASE("layers and per-strategy rho") {
    ExperimentConfig c;
    c.apply_preset("linear-inverse");
    CHECK(c.sampler("exact").rho == std::vector<double>{0.82});
    CHECK(c.sampler("ficd").rho == std::vector<double>{0.18});
    CHECK(c.sampler("mpgd").rho == std::vector<double>{1.0});
    CHECK_FALSE(c.sampler("uncond").guidance);
    c.set("sampler.rho.ficd", "0.3");
    CHECK(c.sampler().rho == std::vector<double>{0.3});
    c.set("seed", "12");
    CHECK(c.seed() == 12);
  }

  TEST_CASE("configuration errors") {
    ExperimentConfig c;
    CHECK_THROWS_AS(c.apply_preset("missing"), ConfigError);
    CHECK_THROWS_AS(c.apply_file("/no/such/config.cfg"), ConfigError);
    c.apply_preset("gaussian-point");
    c.set("sampler.strategy", "dps");
    CHECK_THROWS_AS(c.sampler(), ConfigError);
    c.set("sampler.strategy", "ficd");
    c.set("schedule.beta_max", "1.5");
    CHECK_THROWS_AS(c.schedule(), ConfigError);
  }

  TEST_CASE("commands map failures to exit codes") {
    ExperimentConfig c;
    c.apply_preset("gaussian-point");
    c.set("verify.suites", "tweedie");
    CHECK(run_command("verify", c).exit_code == 0);
    c.set("verify.suites", "no-such-suite");
    CHECK(run_command("verify", c).exit_code == 2);
    CHECK(run_command("launch", c).exit_code == 2);
    ExperimentConfig bad;
    bad.apply_preset("gaussian-point");
    bad.set("schedule.beta_max", "1.5");
    CHECK(run_command("sample", bad).exit_code == 2);
  }

  TEST_CASE("sample writes its files") {
    ExperimentConfig c;
    c.apply_preset("gmm-tilt");
    c.set("schedule.T", "20");
    c.set("sampler.n_chains", "50");
    const std::string dir = temp_dir("sample");
    c.set("output.dir", dir);
    const CommandOutcome r = run_command("sample", c);
    CHECK(r.exit_code == 0);
    for (const char* f : {"samples.csv", "trace.csv", "report.txt"})
      CHECK(std::filesystem::exists(std::filesystem::path(dir) / f));
    std::ifstream in(std::filesystem::path(dir) / "samples.csv");
    CHECK(read_points_csv(in).rows() == 50);
  }

  TEST_CASE("trace command on T = 3") {
    ExperimentConfig c;
    c.apply_preset("gmm-style-analog");
    c.set("schedule.T", "3");
    c.set("output.dir", temp_dir("trace3"));
    CHECK(run_command("trace", c).exit_code == 0);
  }

  TEST_CASE("train-score then sample with the learned model") {
    ExperimentConfig c;
    c.apply_preset("gmm-tilt");
    c.set("schedule.T", "20");
    c.set("train.steps", "40");
    c.set("train.hidden", "16, 16");
    const std::string dir = temp_dir("train");
    c.set("output.dir", dir);
    REQUIRE(run_command("train-score", c).exit_code == 0);
    ExperimentConfig s;
    s.apply_preset("gmm-tilt");
    s.set("model.kind", "learned");
    s.set("model.path", dir + "/score_model.txt");
    s.set("sampler.n_chains", "10");
    s.set("output.dir", dir);
    const CommandOutcome r = run_command("sample", s);
    INFO(r.report);
    CHECK(r.exit_code == 0);
  }

  TEST_CASE("suite names") {
    for (const std::string& s : default_suites())
      CHECK(std::find(known_suites().begin(), known_suites().end(), s) != known_suites().end());
    ExperimentConfig c;
    c.apply_preset("gaussian-point");
    CHECK_THROWS_AS(run_suite("nope", c), ConfigError);
  }

  TEST_CASE("conjugate posterior mean helper") {
    const Vector mu = Vector::Ones(2);
    // alpha_bar = 1 recovers x; large noise recovers the prior mean.
    CHECK((conjugate_posterior_mean(mu, 0.5, 1.0, Vector::Zero(2)) - Vector::Zero(2)).norm() < 1e-15);
    CHECK((conjugate_posterior_mean(mu, 0.5, 1e-14, Vector::Zero(2)) - mu).norm() < 1e-6);
  }
}
