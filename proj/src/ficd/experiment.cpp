// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ficd/random.hpp"
#include "ficd/serialize.hpp"
#include "ficd/verify.hpp"

namespace ficd {

namespace {

constexpr const char* kDefaults = R"(
seed = 0
schedule.kind = linear
schedule.T = 1000
schedule.beta_min = 1e-4
schedule.beta_max = 0.02
data.kind = model
data.samples = 4096
train.steps = 2000
train.batch = 128
train.learning_rate = 1e-3
train.momentum = 0.9
train.hidden = 128, 128, 128
train.time_embed = 16
energy.feature_rows = 1
condition.kind = point
sampler.strategy = ficd
sampler.rho = 1
sampler.rho_scaling = constant
sampler.lambda = 1
sampler.discretization = sde_euler
sampler.ddim_eta = 0
sampler.time_travel.repeats = 0
sampler.time_travel.t_lo = 0
sampler.time_travel.t_hi = 0
sampler.n_chains = 1000
sampler.threads = 1
sampler.final_step_noise = false
sampler.reuse_score = true
sampler.trace_fisher = false
oracle.projections = 64
bench.reps = 20
bench.strategies = ficd, exact
output.dir = ficd-out
verify.suites = all
)";

// Seed tags for the sub-tasks that draw randomness outside the sampler.
constexpr std::uint32_t kTagTrainData = 1;
constexpr std::uint32_t kTagTrain = 2;
constexpr std::uint32_t kTagScoreCheck = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

template <typename Fn>
auto as_config_error(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::filesystem::path prepare_output(const ExperimentConfig& config) {
  const std::filesystem::path dir = config.output_dir();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

template <typename Writer>
void write_output(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  write_file(path.string(), out.str());
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

}  // namespace

const Preset* find_preset(const std::string& name) {
  for (const Preset& p : builtin_presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

ExperimentConfig::ExperimentConfig() : kv_(KeyValues::parse(kDefaults, "<defaults>")) {}

void ExperimentConfig::apply_preset(const std::string& name) {
  const Preset* p = find_preset(name);
  if (!p) {
    std::string names;
    for (const Preset& q : builtin_presets()) names += (names.empty() ? "" : ", ") + q.name;
    throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
  }
  kv_.merge(KeyValues::parse(p->text, "preset " + name));
}

void ExperimentConfig::apply_file(const std::string& path) { kv_.merge(KeyValues::load(path)); }

void ExperimentConfig::apply_text(const std::string& text, const std::string& origin) {
  kv_.merge(KeyValues::parse(text, origin));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) throw ConfigError("empty configuration key");
  kv_.set(std::string(trim(key)), std::string(trim(value)));
}

std::uint64_t ExperimentConfig::seed() const { return kv_.get_u64("seed", 0); }

NoiseSchedule ExperimentConfig::schedule() const { return read_schedule(kv_, "schedule"); }

GaussianMixture ExperimentConfig::model_mixture() const { return read_gmm(kv_, "model"); }

std::unique_ptr<ScoreModel> ExperimentConfig::model(const NoiseSchedule& schedule) const {
  const std::string kind = kv_.at("model.kind");
  if (kind == "gmm") return std::make_unique<GmmScoreModel>(model_mixture(), schedule);
  if (kind == "learned") {
    const std::string path = kv_.at("model.path");
    std::ifstream in(path);
    if (!in) throw ConfigError("score model file '" + path + "' does not exist or cannot be read");
    return LearnedScoreModel::read(in);
  }
  if (kind == "train") {
    const Matrix data = training_data();
    return train_dsm(data, mlp_spec(static_cast<int>(data.rows())), schedule, train_options()).model;
  }
  throw ConfigError("key 'model.kind': unknown model kind '" + kind + "' (expected gmm, learned or train)");
}

std::unique_ptr<EnergyFunction> ExperimentConfig::energy(int dim) const {
  const std::string kind = kv_.at("energy.kind");
  return as_config_error("energy", [&] {
    std::optional<LinearFeatureMap> map;
    if (kind == "gram") {
      const int rows = static_cast<int>(kv_.get_int("energy.feature_rows", 1));
      if (kv_.has("energy.feature_map")) {
        const Matrix w = kv_.get_matrix("energy.feature_map");
        require(rows > 0 && w.rows() % rows == 0, "feature map rows must be a multiple of energy.feature_rows");
        map = LinearFeatureMap{rows, static_cast<int>(w.rows()) / rows, w};
      } else {
        map = LinearFeatureMap::reshape(dim, rows);
      }
    }
    return make_energy(kind, dim, map);
  });
}

Condition ExperimentConfig::condition() const { return read_condition(kv_, "condition"); }

SamplerConfig ExperimentConfig::sampler(const std::optional<std::string>& strategy) const {
  const std::string name = strategy ? *strategy : kv_.get_string("sampler.strategy", "ficd");
  return as_config_error("sampler settings", [&] {
    SamplerConfig s;
    s.guidance = name != "uncond";
    s.strategy = s.guidance ? parse_strategy(name) : Strategy::kUnit;
    const std::string rho_key = kv_.has("sampler.rho." + name) ? "sampler.rho." + name : "sampler.rho";
    const Vector rho = kv_.get_vector(rho_key);
    s.rho.assign(rho.data(), rho.data() + rho.size());
    s.rho_scaling = parse_rho_scaling(kv_.get_string("sampler.rho_scaling", "constant"));
    s.lambda = kv_.get_double("sampler.lambda", 1.0);
    s.discretization = parse_discretization(kv_.get_string("sampler.discretization", "sde_euler"));
    s.ddim_eta = kv_.get_double("sampler.ddim_eta", 0.0);
    s.time_travel.repeats = static_cast<int>(kv_.get_int("sampler.time_travel.repeats", 0));
    s.time_travel.t_lo = static_cast<int>(kv_.get_int("sampler.time_travel.t_lo", 0));
    s.time_travel.t_hi = static_cast<int>(kv_.get_int("sampler.time_travel.t_hi", 0));
    s.n_chains = static_cast<int>(kv_.get_int("sampler.n_chains", 1000));
    s.threads = static_cast<int>(kv_.get_int("sampler.threads", 1));
    s.final_step_noise = kv_.get_bool("sampler.final_step_noise", false);
    s.reuse_score = kv_.get_bool("sampler.reuse_score", true);
    s.trace_fisher = kv_.get_bool("sampler.trace_fisher", false);
    s.seed = seed();
    return s;
  });
}

MlpSpec ExperimentConfig::mlp_spec(int dim) const {
  MlpSpec spec;
  spec.dim = dim;
  spec.time_embed = static_cast<int>(kv_.get_int("train.time_embed", 16));
  spec.hidden = as_config_error("key 'train.hidden'", [&] { return parse_int_list(kv_.get_string("train.hidden", "")); });
  as_config_error("network spec", [&] {
    spec.validate();
    return 0;
  });
  return spec;
}

TrainOptions ExperimentConfig::train_options() const {
  TrainOptions o;
  o.steps = static_cast<int>(kv_.get_int("train.steps", o.steps));
  o.batch = static_cast<int>(kv_.get_int("train.batch", o.batch));
  o.learning_rate = kv_.get_double("train.learning_rate", o.learning_rate);
  o.momentum = kv_.get_double("train.momentum", o.momentum);
  o.seed = derive_seed(seed(), kTagTrain);
  return o;
}

Matrix ExperimentConfig::training_data() const {
  const std::string kind = kv_.get_string("data.kind", "model");
  if (kind == "csv") {
    const std::string path = kv_.at("data.path");
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset file '" + path + "' does not exist or cannot be read");
    return read_points_csv(in).transpose();
  }
  GaussianMixture gmm;
  if (kind == "model") {
    if (kv_.get_string("model.kind", "") != "gmm") {
      throw ConfigError("data.kind = model needs model.kind = gmm; set data.kind to gmm or csv");
    }
    gmm = model_mixture();
  } else if (kind == "gmm") {
    gmm = read_gmm(kv_, "data");
  } else {
    throw ConfigError("key 'data.kind': unknown dataset kind '" + kind + "' (expected model, gmm or csv)");
  }
  const int n = static_cast<int>(kv_.get_int("data.samples", 4096));
  if (n <= 0) throw ConfigError("data.samples must be positive");
  return sample_gmm(gmm, n, derive_seed(seed(), kTagTrainData)).transpose();
}

std::optional<GaussianMixture> ExperimentConfig::data_mixture() const {
  const std::string kind = kv_.get_string("data.kind", "model");
  if (kind == "model" && kv_.get_string("model.kind", "") == "gmm") return model_mixture();
  if (kind == "gmm") return read_gmm(kv_, "data");
  return std::nullopt;
}

std::string ExperimentConfig::output_dir() const { return kv_.get_string("output.dir", "ficd-out"); }

std::vector<std::string> ExperimentConfig::suites() const {
  std::vector<std::string> out;
  for (const std::string& s : split_list(kv_.get_string("verify.suites", "all"))) {
    if (s == "all") {
      for (const std::string& d : default_suites()) out.push_back(d);
    } else {
      if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end()) {
        std::string names = "all";
        for (const std::string& k : known_suites()) names += ", " + k;
        throw ConfigError("unknown verify suite '" + s + "' (available: " + names + ")");
      }
      out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("verify.suites selects no suite");
  return out;
}

CommandOutcome cmd_train_score(const ExperimentConfig& config) {
  std::ostringstream report;
  const NoiseSchedule schedule = config.schedule();
  const Matrix data = config.training_data();
  const int d = static_cast<int>(data.rows());
  const MlpSpec spec = config.mlp_spec(d);
  const TrainOptions options = config.train_options();
  if (options.steps == 0) report << "warning: train.steps = 0, the saved network is untrained\n";
  const TrainResult result = train_dsm(data, spec, schedule, options);

  const auto dir = prepare_output(config);
  const std::string model_path = config.values().get_string("train.out", (dir / "score_model.txt").string());
  write_output(model_path, [&](std::ostream& out) { result.model->write(out); });
  write_output(dir / "train_loss.csv", [&](std::ostream& out) {
    out << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
      out << i << ',' << format_double(result.loss_history[i]) << '\n';
    }
  });
  report << "trained " << options.steps << " steps on " << data.cols() << " points (d=" << d << ")\n";
  report << "final loss " << fmt(result.model->final_loss()) << "\n";

  if (const auto mixture = config.data_mixture()) {
    // Score error against the analytic marginal score on draws from p_t.
    const int T = schedule.steps();
    for (int t : {std::max(1, T / 4), std::max(1, T / 2), std::max(1, (3 * T) / 4)}) {
      const double ab = schedule.alpha_bar(t);
      const Matrix x0 = sample_gmm(*mixture, 512, derive_seed(config.seed(), kTagScoreCheck)).transpose();
      Matrix xt = std::sqrt(ab) * x0;
      for (Eigen::Index j = 0; j < xt.cols(); ++j) {
        NoiseStream rng(derive_seed(config.seed(), kTagScoreCheck), static_cast<std::uint64_t>(j),
                        substream_id(t, 0, StreamPurpose::kAux));
        xt.col(j) += std::sqrt(1.0 - ab) * rng.normal_vector(d);
      }
      const Matrix learned = result.model->score_batch(xt, t);
      double err = 0.0;
      for (Eigen::Index j = 0; j < xt.cols(); ++j) {
        err += (learned.col(j) - gmm_marginal_score(*mixture, schedule, xt.col(j), t)).squaredNorm() / d;
      }
      report << "score_mse t=" << t << " " << fmt(err / static_cast<double>(xt.cols())) << "\n";
    }
  }
  report << "wrote " << model_path << "\n";
  return {0, report.str()};
}

CommandOutcome cmd_sample(const ExperimentConfig& config) {
  const NoiseSchedule schedule = config.schedule();
  const auto model = config.model(schedule);
  const SamplerConfig sc = config.sampler();
  std::unique_ptr<EnergyFunction> energy;
  std::optional<Condition> condition;
  if (sc.guidance) {
    energy = config.energy(model->dim());
    condition = config.condition();
  }
  const SampleResult result = sample(sc, *model, energy.get(), condition ? &*condition : nullptr);

  const auto dir = prepare_output(config);
  std::vector<int> ids;
  for (int i = 0; i < sc.n_chains; ++i) {
    if (!result.failed[static_cast<std::size_t>(i)]) ids.push_back(i);
  }
  const Matrix valid = result.valid_samples();
  write_output(dir / "samples.csv", [&](std::ostream& out) { write_samples_csv(out, valid, ids); });
  write_output(dir / "trace.csv", [&](std::ostream& out) { write_trace_csv(out, result.trace); });

  double grad = 0.0;
  for (const TraceRow& r : result.trace.rows) grad += r.grad_norm;
  grad /= static_cast<double>(std::max<std::size_t>(1, result.trace.rows.size()));

  std::ostringstream report;
  report << "strategy=" << (sc.guidance ? std::string(to_string(sc.strategy)) : std::string("uncond"))
         << " T=" << model->schedule().steps() << " N=" << sc.n_chains << " wall_time_s=" << fmt(result.wall_time_s, 4)
         << " mean_grad_norm=" << fmt(grad) << "\n";
  if (result.failed_count() > 0) {
    report << "flagged chains: " << result.failed_count() << " (dropped from samples.csv)\n";
  }
  write_file((dir / "report.txt").string(), report.str());
  return {0, report.str()};
}

CommandOutcome cmd_verify(const ExperimentConfig& config) {
  config.schedule();  // a broken schedule is a configuration error before any suite runs
  const std::vector<std::string> suites = config.suites();
  std::ostringstream report;
  bool ok = true;
  for (const std::string& name : suites) {
    const SuiteReport r = run_suite(name, config);
    report << r.to_text();
    ok = ok && r.pass();
  }
  report << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  const auto dir = prepare_output(config);
  write_file((dir / "report.txt").string(), report.str());
  return {ok ? 0 : 1, report.str()};
}

CommandOutcome cmd_trace(const ExperimentConfig& config) {
  const PhaseMetrics m = phase_metrics(config);
  const auto dir = prepare_output(config);
  write_output(dir / "trace_exact.csv", [&](std::ostream& out) { write_trace_csv(out, m.trace_exact); });
  write_output(dir / "trace_ficd.csv", [&](std::ostream& out) { write_trace_csv(out, m.trace_ficd); });
  write_output(dir / "trace_compare.csv", [&](std::ostream& out) {
    out << "t,grad_norm_exact,grad_norm_ficd,coefficient_exact,coefficient_ficd,cr_bound\n";
    const std::size_t n = std::min(m.trace_exact.rows.size(), m.trace_ficd.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
      const TraceRow& e = m.trace_exact.rows[i];
      const TraceRow& f = m.trace_ficd.rows[i];
      out << e.t << ',' << format_double(e.grad_norm) << ',' << format_double(f.grad_norm) << ','
          << format_double(e.coefficient_used) << ',' << format_double(f.coefficient_used) << ','
          << format_double(e.cr_bound) << '\n';
    }
  });
  std::ostringstream report;
  auto line = [&](const char* name, const PhaseProfile& p) {
    report << name << " early=" << fmt(p.early) << " mid=" << fmt(p.mid) << " late=" << fmt(p.late) << "\n";
  };
  line("exact", m.exact);
  line("ficd", m.ficd);
  report << "exact mid>early: " << (m.exact.mid > m.exact.early ? "yes" : "no")
         << ", mid>late: " << (m.exact.mid > m.exact.late ? "yes" : "no")
         << ", ficd early>exact early: " << (m.ficd.early > m.exact.early ? "yes" : "no") << "\n";
  write_file((dir / "report.txt").string(), report.str());
  return {0, report.str()};
}

CommandOutcome cmd_bench(const ExperimentConfig& config) {
  const SpeedupMetrics m = speedup_metrics(config);
  const auto dir = prepare_output(config);
  write_output(dir / "timing.csv", [&](std::ostream& out) {
    write_bench_csv(out, m.rows);
    out << "ratio_ficd_over_exact,,," << format_double(m.ratio) << ",,,,\n";
  });
  std::ostringstream report;
  for (const BenchRow& r : m.rows) {
    report << r.strategy << " median_run_s=" << fmt(r.median_run_s, 4) << " score_evals/step=" << r.score_evals_per_step
           << " jacobian_passes/step=" << r.jacobian_passes_per_step << "\n";
  }
  report << "ficd/exact time ratio " << fmt(m.ratio, 4) << "\n";
  write_file((dir / "report.txt").string(), report.str());
  return {0, report.str()};
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const IoError*>(&e)) {
    return 2;
  }
  return 3;
}

CommandOutcome run_command(const std::string& command, const ExperimentConfig& config) {
  try {
    if (command == "train-score") return cmd_train_score(config);
    if (command == "sample") return cmd_sample(config);
    if (command == "verify") return cmd_verify(config);
    if (command == "trace") return cmd_trace(config);
    if (command == "bench") return cmd_bench(config);
    return {2, "error: unknown command '" + command + "'\n"};
  } catch (const std::exception& e) {
    return {exit_code_for(e), std::string("error: ") + e.what() + "\n"};
  }
}

}  // namespace ficd
