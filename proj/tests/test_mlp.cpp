#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ficd/analytics.hpp"
#include "ficd/mlp.hpp"
#include "ficd/random.hpp"

using namespace ficd;

namespace {

MlpSpec small_spec(int d) {
  MlpSpec s;
  s.dim = d;
  s.hidden = {16, 16};
  s.time_embed = 8;
  return s;
}

// Mean squared error per coordinate against a reference score on draws from p_t.
template <class Ref>
double score_mse(const ScoreModel& m, const Matrix& x0, int t, Ref ref) {
  const double ab = m.schedule().alpha_bar(t);
  double err = 0;
  for (Eigen::Index j = 0; j < x0.cols(); ++j) {
    NoiseStream rng(5, static_cast<std::uint64_t>(j), substream_id(t, 0, StreamPurpose::kAux));
    const Vector xt = std::sqrt(ab) * x0.col(j) + std::sqrt(1 - ab) * rng.normal_vector(x0.rows());
    err += (m.score(xt, t) - ref(xt, t)).squaredNorm() / static_cast<double>(x0.rows());
  }
  return err / static_cast<double>(x0.cols());
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("zero steps gives an untrained network") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    TrainOptions o;
    o.steps = 0;
    const TrainResult r = train_dsm(Matrix::Zero(2, 10), small_spec(2), s, o);
    CHECK_FALSE(r.model->trained());
    CHECK(r.loss_history.empty());
  }

  TEST_CASE("backprop Jacobian and VJP agree with finite differences") {
    const NoiseSchedule s = NoiseSchedule::linear(50, 1e-4, 0.02);
    LearnedScoreModel m(small_spec(3), s, 7);
    NoiseStream rng(2, 0, 0);
    for (int k = 0; k < 10; ++k) {
      const Vector x = rng.normal_vector(3);
      const int t = 1 + static_cast<int>(rng.below(50));
      const Matrix j = m.jacobian(x, t);
      CHECK((j - finite_diff_jacobian(m, x, t)).norm() / j.norm() < 1e-6);
      const Vector v = rng.normal_vector(3);
      const Matrix pulled = m.record(x, t)->vjp(v);
      CHECK((pulled.col(0) - j.transpose() * v).norm() < 1e-10);
    }
  }

  TEST_CASE("batch and single evaluations agree") {
    LearnedScoreModel m(small_spec(2), NoiseSchedule::linear(20, 1e-4, 0.02), 3);
    Matrix xs(2, 4);
    xs << 0, 1, -2, 0.5, 1, 0, 3, -0.5;
    const Matrix b = m.score_batch(xs, 7);
    for (int j = 0; j < 4; ++j) CHECK((b.col(j) - m.score(xs.col(j), 7)).norm() < 1e-13);
  }

  TEST_CASE("training on standard normal data learns -x") {
    const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 0.02);
    const Matrix data = sample_gmm(GaussianMixture::single(Vector::Zero(2), 1.0), 4096, 1).transpose();
    TrainOptions o;
    o.steps = 2000;
    o.seed = 2;
    MlpSpec spec;
    spec.dim = 2;
    const TrainResult r = train_dsm(data, spec, s, o);
    CHECK(r.model->trained());
    CHECK(r.loss_history.size() == 2000);
    const Matrix x0 = sample_gmm(GaussianMixture::single(Vector::Zero(2), 1.0), 512, 3).transpose();
    for (int t : {50, 100, 150}) {
      const double mse = score_mse(*r.model, x0, t, [](const Vector& x, int) -> Vector { return -x; });
      INFO("t = " << t << " mse = " << mse);
      CHECK(mse < 0.05);
    }
  }

  TEST_CASE("training on a point mass learns -x / (1 - ab)") {
    const NoiseSchedule s = NoiseSchedule::linear(100, 1e-4, 0.02);
    TrainOptions o;
    o.steps = 1500;
    o.seed = 4;
    MlpSpec spec = small_spec(2);
    spec.hidden = {64, 64};
    const TrainResult r = train_dsm(Matrix::Zero(2, 256), spec, s, o);
    const Matrix x0 = Matrix::Zero(2, 256);
    for (int t : {50, 100}) {
      const double scale = 1.0 - s.alpha_bar(t);
      const double mse = score_mse(*r.model, x0, t, [scale](const Vector& x, int) -> Vector { return -x / scale; });
      // Relative to the typical squared score 1 / (1 - ab).
      INFO("t = " << t << " relative mse = " << mse * scale);
      CHECK(mse * scale < 0.05);
    }
  }

  TEST_CASE("training is deterministic") {
    const NoiseSchedule s = NoiseSchedule::linear(20, 1e-4, 0.02);
    const Matrix data = sample_gmm(GaussianMixture::single(Vector::Ones(2), 0.5), 64, 8).transpose();
    TrainOptions o;
    o.steps = 30;
    const TrainResult a = train_dsm(data, small_spec(2), s, o), b = train_dsm(data, small_spec(2), s, o);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.model->weights()[0] == b.model->weights()[0]);
  }

  TEST_CASE("network file round trip is exact") {
    const NoiseSchedule s = NoiseSchedule::linear(33, 2e-4, 0.03);
    LearnedScoreModel m(small_spec(3), s, 11);
    m.set_training_record(12, 0.5);
    std::stringstream io;
    m.write(io);
    const auto r = LearnedScoreModel::read(io);
    CHECK(r->steps_trained() == 12);
    CHECK(r->schedule().steps() == 33);
    const Vector x = (Vector(3) << 0.1, -0.2, 0.3).finished();
    CHECK(r->score(x, 10) == m.score(x, 10));
    std::istringstream bad("not a network");
    CHECK_THROWS(LearnedScoreModel::read(bad));
  }

  TEST_CASE("invalid training input") {
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.02);
    TrainOptions o;
    CHECK_THROWS_AS(train_dsm(Matrix::Zero(3, 10), small_spec(2), s, o), InvalidArgument);
    CHECK_THROWS_AS(train_dsm(Matrix::Zero(2, 0), small_spec(2), s, o), InvalidArgument);
    o.learning_rate = -1;
    CHECK_THROWS_AS(train_dsm(Matrix::Zero(2, 10), small_spec(2), s, o), InvalidArgument);
  }
}
