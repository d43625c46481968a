// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0
//
// ficd: train score networks, run guided samplers, verify and benchmark.
//
// Exit codes: 0 success, 1 a verification assertion failed, 2 bad
// configuration or arguments, 3 runtime failure (too many chains diverged).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ficd/ficd.h"

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::optional<unsigned long long> seed;
  std::string out;
  std::optional<int> threads;
  std::vector<std::string> sets;
  std::string strategy;
  std::optional<int> steps;
  std::string rho;
  std::string suite;
  std::string model;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
  app->add_option("--preset", o.preset, "Built-in preset to start from");
  app->add_option("--seed", o.seed, "Root seed");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  app->add_option("--set", o.sets, "Override a key: --set key=value (repeatable)");
}

using Experiment = std::unique_ptr<ficd_experiment, decltype(&ficd_experiment_destroy)>;

bool check(ficd_status s) {
  if (s == FICD_OK) return true;
  std::cerr << "error: " << ficd_last_error() << '\n';
  return false;
}

bool set(ficd_experiment* e, const std::string& key, const std::string& value) {
  return check(ficd_experiment_set(e, key.c_str(), value.c_str()));
}

// Layers: preset, then file, then the individual flags, then --set.
int run(const std::string& command, const Options& o) {
  ficd_experiment* raw = nullptr;
  if (!check(ficd_experiment_create(&raw))) return 3;
  Experiment e(raw, &ficd_experiment_destroy);

  if (!o.preset.empty() && !check(ficd_experiment_apply_preset(e.get(), o.preset.c_str()))) return 2;
  if (!o.config.empty() && !check(ficd_experiment_apply_file(e.get(), o.config.c_str()))) return 2;

  bool ok = true;
  if (o.seed) ok = ok && set(e.get(), "seed", std::to_string(*o.seed));
  if (!o.out.empty()) ok = ok && set(e.get(), "output.dir", o.out);
  if (o.threads) ok = ok && set(e.get(), "sampler.threads", std::to_string(*o.threads));
  if (!o.strategy.empty()) ok = ok && set(e.get(), "sampler.strategy", o.strategy);
  if (o.steps) ok = ok && set(e.get(), "schedule.T", std::to_string(*o.steps));
  if (!o.rho.empty()) {
    ok = ok && set(e.get(), "sampler.rho", o.rho);
    for (const char* s : {"exact", "ficd", "mpgd", "unit"}) ok = ok && set(e.get(), std::string("sampler.rho.") + s, o.rho);
  }
  if (!o.suite.empty()) ok = ok && set(e.get(), "verify.suites", o.suite);
  if (!o.model.empty()) {
    ok = ok && set(e.get(), "model.kind", "learned");
    ok = ok && set(e.get(), "model.path", o.model);
  }
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return 2;
    }
    ok = ok && set(e.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!ok) return 2;

  int code = 3;
  if (!check(ficd_experiment_run(e.get(), command.c_str(), &code))) return 3;
  const char* report = ficd_experiment_report(e.get());
  (code >= 2 ? std::cerr : std::cout) << report;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher-information guided conditional diffusion sampling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ficd ") + ficd_version());
  bool list_presets = false;
  app.add_flag("--list-presets", list_presets, "Print the built-in presets and exit");

  Options o;
  auto* train = app.add_subcommand("train-score", "Fit an MLP score network by denoising score matching");
  auto* sample = app.add_subcommand("sample", "Draw guided (or unconditional) samples");
  auto* verify = app.add_subcommand("verify", "Run verification suites; exit 1 if any check fails");
  auto* trace = app.add_subcommand("trace", "Per-step diagnostics for EXACT and FICD on one configuration");
  auto* bench = app.add_subcommand("bench", "Time EXACT against FICD");
  for (CLI::App* sub : {train, sample, verify, trace, bench}) add_common(sub, o);

  sample->add_option("--strategy", o.strategy, "ficd | exact | mpgd | unit | uncond");
  for (CLI::App* sub : {sample, verify, trace, bench}) {
    sub->add_option("-T,--T,--steps", o.steps, "Number of diffusion steps");
    sub->add_option("--rho", o.rho, "Guidance step size (every strategy)");
    sub->add_option("--model", o.model, "Trained score network file");
  }
  train->add_option("-T,--T,--steps", o.steps, "Number of diffusion steps");
  verify->add_option("--suite", o.suite, "Comma-separated suites or 'all'");

  // No subcommand is needed just to list presets.
  if (argc == 2 && std::string(argv[1]) == "--list-presets") {
    for (int i = 0; i < ficd_preset_count(); ++i) std::cout << ficd_preset_name(i) << '\n';
    return 0;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  for (CLI::App* sub : app.get_subcommands()) return run(sub->get_name(), o);
  return 2;
}
