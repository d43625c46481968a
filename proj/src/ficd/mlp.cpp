// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/mlp.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "ficd/kv.hpp"
#include "ficd/random.hpp"

namespace ficd {

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Matrix silu(const Matrix& a) {
  return a.unaryExpr([](double v) { return v * sigmoid(v); });
}

Matrix silu_grad(const Matrix& a) {
  return a.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

// Input block [x; embedding(t_j)] for per-column timesteps.
Matrix network_input(const Matrix& xs, std::span<const int> ts, int steps, int width) {
  Matrix in(xs.rows() + width, xs.cols());
  in.topRows(xs.rows()) = xs;
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    in.col(j).tail(width) = time_embedding(ts[static_cast<std::size_t>(j)], steps, width);
  }
  return in;
}

}  // namespace

void MlpSpec::validate() const {
  require(dim > 0, "network dimension must be positive");
  require(time_embed >= 0 && time_embed % 2 == 0, "time embedding width must be even and >= 0");
  require(!hidden.empty(), "network needs at least one hidden layer");
  for (int h : hidden) require(h > 0, "hidden layer widths must be positive");
}

Vector time_embedding(int t, int steps, int width) {
  Vector e(width);
  const double tau = static_cast<double>(t) / steps;
  for (int k = 0; k < width / 2; ++k) {
    const double w = std::numbers::pi / 2.0 * std::ldexp(1.0, k);
    e[2 * k] = std::sin(tau * w);
    e[2 * k + 1] = std::cos(tau * w);
  }
  return e;
}

LearnedScoreModel::LearnedScoreModel(MlpSpec spec, NoiseSchedule schedule, std::uint64_t seed)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
  spec_.validate();
  int fan_in = spec_.dim + spec_.time_embed;
  std::vector<int> widths = spec_.hidden;
  widths.push_back(spec_.dim);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    NoiseStream rng(seed, l, substream_id(0, 0, StreamPurpose::kInit));
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(widths[l], fan_in);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * rng.normal();
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(widths[l]));
    fan_in = widths[l];
  }
}

LearnedScoreModel::LearnedScoreModel(MlpSpec spec, NoiseSchedule schedule,
                                     std::vector<Matrix> weights, std::vector<Vector> biases)
    : spec_(std::move(spec)),
      schedule_(std::move(schedule)),
      weights_(std::move(weights)),
      biases_(std::move(biases)) {
  spec_.validate();
  require(weights_.size() == spec_.hidden.size() + 1 && biases_.size() == weights_.size(),
          "layer count does not match the network spec");
  int fan_in = spec_.dim + spec_.time_embed;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const int out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.dim;
    require(weights_[l].rows() == out && weights_[l].cols() == fan_in,
            "layer " + std::to_string(l) + " weight has the wrong shape");
    require(biases_[l].size() == out, "layer " + std::to_string(l) + " bias has the wrong size");
    require(weights_[l].allFinite() && biases_[l].allFinite(), "network parameters must be finite");
    fan_in = out;
  }
}

void LearnedScoreModel::set_training_record(int steps, double final_loss) {
  steps_trained_ = steps;
  final_loss_ = final_loss;
}

double LearnedScoreModel::score_scale(int t) const {
  const double ab = schedule_.alpha_bar(t);
  require(t >= 1 && ab < 1.0, "learned score is undefined at alpha_bar = 1");
  return 1.0 / std::sqrt(1.0 - ab);
}

LearnedScoreModel::Activations LearnedScoreModel::forward(const Matrix& xs, int t) const {
  std::vector<int> ts(static_cast<std::size_t>(xs.cols()), t);
  Activations acts;
  acts.post.push_back(network_input(xs, ts, schedule_.steps(), spec_.time_embed));
  const std::size_t hidden = spec_.hidden.size();
  for (std::size_t l = 0; l < hidden; ++l) {
    Matrix a = weights_[l] * acts.post.back();
    a.colwise() += biases_[l];
    acts.post.push_back(silu(a));
    acts.pre.push_back(std::move(a));
  }
  acts.eps = weights_[hidden] * acts.post.back();
  acts.eps.colwise() += biases_[hidden];
  return acts;
}

Matrix LearnedScoreModel::backward_input(const Activations& acts, const Matrix& eps_cotangent) const {
  const std::size_t hidden = spec_.hidden.size();
  Matrix g = weights_[hidden].transpose() * eps_cotangent;
  for (std::size_t l = hidden; l-- > 0;) {
    g.array() *= silu_grad(acts.pre[l]).array();
    g = weights_[l].transpose() * g;
  }
  return g;
}

Matrix LearnedScoreModel::predict_eps(const Matrix& xs, int t) const {
  require(xs.rows() == spec_.dim, "point dimension does not match the network");
  return forward(xs, t).eps;
}

Matrix LearnedScoreModel::eval_scores(const Matrix& xs, int t) const {
  return -score_scale(t) * forward(xs, t).eps;
}

namespace {

class MlpTape final : public ScoreTape {
 public:
  MlpTape(const LearnedScoreModel& model, LearnedScoreModel::Activations acts, double scale)
      : ScoreTape(model, -scale * acts.eps), model_(model), acts_(std::move(acts)), scale_(scale) {}

 protected:
  Matrix eval_vjp(const Matrix& cotangents) const override {
    const Matrix g = model_.backward_input(acts_, -scale_ * cotangents);
    return g.topRows(model_.dim());
  }

 private:
  const LearnedScoreModel& model_;
  LearnedScoreModel::Activations acts_;
  double scale_;
};

}  // namespace

std::unique_ptr<ScoreTape> LearnedScoreModel::eval_record(const Matrix& xs, int t) const {
  return std::make_unique<MlpTape>(*this, forward(xs, t), score_scale(t));
}

Matrix LearnedScoreModel::eval_jacobian(const Vector& x, int t) const {
  const int d = spec_.dim;
  const Matrix xs = x.replicate(1, d);
  const Activations acts = forward(xs, t);
  // Column k of the pullback of e_k is row k of the Jacobian.
  const Matrix rows = backward_input(acts, -score_scale(t) * Matrix::Identity(d, d)).topRows(d);
  return rows.transpose();
}

void LearnedScoreModel::write(std::ostream& out) const {
  out << "ficd-mlp 1\n";
  out << "dim " << spec_.dim << "\n";
  out << "time_embed " << spec_.time_embed << "\n";
  out << "hidden";
  for (int h : spec_.hidden) out << ' ' << h;
  out << "\n";
  const ScheduleSpec& s = schedule_.spec();
  out << "schedule " << to_string(s.kind) << ' ' << s.steps << ' ' << format_double(s.beta_min)
      << ' ' << format_double(s.beta_max) << "\n";
  if (s.kind == ScheduleKind::kCustom) {
    out << "betas";
    for (double b : schedule_.betas()) out << ' ' << format_double(b);
    out << "\n";
  }
  out << "steps_trained " << steps_trained_ << "\n";
  out << "final_loss " << format_double(final_loss_) << "\n";
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Matrix& w = weights_[l];
    out << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << "\n";
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? " " : "") << format_double(w(r, c));
      out << "\n";
    }
    out << "bias " << l << ' ' << biases_[l].size() << "\n";
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) out << (r ? " " : "") << format_double(biases_[l][r]);
    out << "\n";
  }
}

namespace {

std::string expect_word(std::istream& in, const char* word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw IoError(std::string("malformed network file: expected '") + word + "', found '" + got + "'");
  }
  return got;
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  std::string token;
  if (!(in >> token)) throw IoError(std::string("malformed network file: missing ") + what);
  try {
    if constexpr (std::is_same_v<T, double>) {
      return parse_double(token);
    } else {
      return static_cast<T>(parse_int(token));
    }
  } catch (const InvalidArgument&) {
    throw IoError(std::string("malformed network file: bad ") + what + " '" + token + "'");
  }
}

}  // namespace

std::unique_ptr<LearnedScoreModel> LearnedScoreModel::read(std::istream& in) {
  expect_word(in, "ficd-mlp");
  if (read_value<int>(in, "format version") != 1) throw IoError("unsupported network file version");
  MlpSpec spec;
  expect_word(in, "dim");
  spec.dim = read_value<int>(in, "dim");
  expect_word(in, "time_embed");
  spec.time_embed = read_value<int>(in, "time_embed");
  expect_word(in, "hidden");
  spec.hidden.clear();
  std::string line;
  std::getline(in, line);
  std::istringstream hidden_line(line);
  for (std::string tok; hidden_line >> tok;) spec.hidden.push_back(static_cast<int>(parse_int(tok)));
  expect_word(in, "schedule");
  std::string kind;
  in >> kind;
  ScheduleSpec sched;
  sched.kind = parse_schedule_kind(kind);
  sched.steps = read_value<int>(in, "schedule length");
  sched.beta_min = read_value<double>(in, "beta_min");
  sched.beta_max = read_value<double>(in, "beta_max");
  std::optional<NoiseSchedule> schedule;
  if (sched.kind == ScheduleKind::kCustom) {
    expect_word(in, "betas");
    std::vector<double> betas;
    for (int i = 0; i < sched.steps; ++i) betas.push_back(read_value<double>(in, "beta"));
    schedule = NoiseSchedule::from_betas(std::move(betas));
  } else {
    schedule = NoiseSchedule::from_spec(sched);
  }
  expect_word(in, "steps_trained");
  const int steps_trained = read_value<int>(in, "steps_trained");
  expect_word(in, "final_loss");
  const double final_loss = read_value<double>(in, "final_loss");
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
    expect_word(in, "weight");
    read_value<int>(in, "layer index");
    const int rows = read_value<int>(in, "rows");
    const int cols = read_value<int>(in, "cols");
    if (rows <= 0 || cols <= 0) throw IoError("malformed network file: bad layer shape");
    Matrix w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = read_value<double>(in, "weight");
    expect_word(in, "bias");
    read_value<int>(in, "layer index");
    const int n = read_value<int>(in, "bias size");
    if (n <= 0) throw IoError("malformed network file: bad bias size");
    Vector b(n);
    for (int r = 0; r < n; ++r) b[r] = read_value<double>(in, "bias");
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  auto model = std::make_unique<LearnedScoreModel>(spec, *schedule, std::move(weights), std::move(biases));
  model->set_training_record(steps_trained, final_loss);
  return model;
}

struct MlpTrainer {
  static TrainResult run(const Matrix& dataset, const MlpSpec& spec, const NoiseSchedule& schedule,
                         const TrainOptions& opt) {
    require(dataset.cols() > 0, "training dataset is empty");
    require(dataset.rows() == spec.dim, "dataset dimension does not match the network");
    require(dataset.allFinite(), "training dataset contains non-finite values");
    require(opt.steps >= 0 && opt.batch > 0, "training steps must be >= 0 and batch > 0");
    require(std::isfinite(opt.learning_rate) && opt.learning_rate > 0.0, "learning rate must be positive");
    require(std::isfinite(opt.momentum) && opt.momentum >= 0.0 && opt.momentum < 1.0,
            "momentum must lie in [0, 1)");

    TrainResult result{std::make_unique<LearnedScoreModel>(spec, schedule, opt.seed), {}};
    LearnedScoreModel& net = *result.model;
    const std::size_t layers = net.weights_.size();
    std::vector<Matrix> vel_w;
    std::vector<Vector> vel_b;
    for (std::size_t l = 0; l < layers; ++l) {
      vel_w.push_back(Matrix::Zero(net.weights_[l].rows(), net.weights_[l].cols()));
      vel_b.push_back(Vector::Zero(net.biases_[l].size()));
    }

    const int T = schedule.steps();
    const int d = spec.dim;
    const int batch = opt.batch;
    Matrix x0(d, batch), noise(d, batch), xt(d, batch);
    std::vector<int> ts(static_cast<std::size_t>(batch));
    double ema = 0.0;

    for (int step = 0; step < opt.steps; ++step) {
      NoiseStream rng(opt.seed, static_cast<std::uint64_t>(step), substream_id(0, 0, StreamPurpose::kAux));
      for (int b = 0; b < batch; ++b) {
        x0.col(b) = dataset.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(dataset.cols()))));
        ts[static_cast<std::size_t>(b)] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
        rng.fill_normal(noise.col(b));
        const double ab = schedule.alpha_bar(ts[static_cast<std::size_t>(b)]);
        xt.col(b) = std::sqrt(ab) * x0.col(b) + std::sqrt(1.0 - ab) * noise.col(b);
      }

      // Forward with per-column timesteps.
      std::vector<Matrix> pre, post;
      post.push_back(network_input(xt, ts, T, spec.time_embed));
      for (std::size_t l = 0; l + 1 < layers; ++l) {
        Matrix a = net.weights_[l] * post.back();
        a.colwise() += net.biases_[l];
        post.push_back(silu(a));
        pre.push_back(std::move(a));
      }
      Matrix eps = net.weights_[layers - 1] * post.back();
      eps.colwise() += net.biases_[layers - 1];

      const Matrix resid = eps - noise;
      const double loss = resid.squaredNorm() / batch;
      if (!std::isfinite(loss)) {
        throw NumericalError("denoising score matching diverged at step " + std::to_string(step) +
                             " (loss is not finite); lower the learning rate");
      }
      result.loss_history.push_back(loss);
      ema = step == 0 ? loss : 0.98 * ema + 0.02 * loss;

      // Backward.
      Matrix g = (2.0 / batch) * resid;
      for (std::size_t l = layers; l-- > 0;) {
        const Matrix grad_w = g * post[l].transpose();
        const Vector grad_b = g.rowwise().sum();
        if (l > 0) {
          g = net.weights_[l].transpose() * g;
          g.array() *= silu_grad(pre[l - 1]).array();
        }
        vel_w[l] = opt.momentum * vel_w[l] - opt.learning_rate * grad_w;
        vel_b[l] = opt.momentum * vel_b[l] - opt.learning_rate * grad_b;
        net.weights_[l] += vel_w[l];
        net.biases_[l] += vel_b[l];
      }
    }
    net.set_training_record(opt.steps, opt.steps > 0 ? ema : 0.0);
    return result;
  }
};

TrainResult train_dsm(const Matrix& dataset, const MlpSpec& spec, const NoiseSchedule& schedule,
                      const TrainOptions& options) {
  return MlpTrainer::run(dataset, spec, schedule, options);
}

}  // namespace ficd
