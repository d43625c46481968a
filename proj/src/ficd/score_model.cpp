// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ficd {

Matrix ScoreTape::vjp(const Matrix& cotangents) const {
  require(cotangents.rows() == scores_.rows() && cotangents.cols() == scores_.cols(),
          "cotangent shape does not match the recorded batch");
  model_.add_jacobian_passes(static_cast<std::uint64_t>(cotangents.cols()));
  return eval_vjp(cotangents);
}

void ScoreModel::check_input(const Matrix& xs, int t) const {
  require(xs.rows() == dim(), "point dimension " + std::to_string(xs.rows()) +
                                  " does not match model dimension " + std::to_string(dim()));
  require(t >= 0 && t <= schedule().steps(), "timestep " + std::to_string(t) + " outside 0.." +
                                                 std::to_string(schedule().steps()));
}

Vector ScoreModel::score(const Vector& x, int t) const {
  Matrix xs = x;
  return score_batch(xs, t).col(0);
}

Matrix ScoreModel::score_batch(const Matrix& xs, int t) const {
  check_input(xs, t);
  score_evals_ += static_cast<std::uint64_t>(xs.cols());
  return eval_scores(xs, t);
}

Matrix ScoreModel::jacobian(const Vector& x, int t) const {
  check_input(x, t);
  jacobian_passes_ += 1;
  Matrix j = eval_jacobian(x, t);
  if (!j.allFinite()) throw NumericalError("score Jacobian has non-finite entries");
  return j;
}

std::unique_ptr<ScoreTape> ScoreModel::record(const Matrix& xs, int t) const {
  check_input(xs, t);
  score_evals_ += static_cast<std::uint64_t>(xs.cols());
  return eval_record(xs, t);
}

EvalCounts ScoreModel::counts() const { return {score_evals_.load(), jacobian_passes_.load()}; }

void ScoreModel::reset_counts() const {
  score_evals_ = 0;
  jacobian_passes_ = 0;
}

Matrix ScoreModel::eval_jacobian(const Vector& x, int t) const {
  auto f = [&](const Vector& p) -> Vector {
    Matrix one = p;
    return eval_scores(one, t).col(0);
  };
  return finite_diff_jacobian(f, x, default_fd_step(x));
}

namespace {

class JacobianTape final : public ScoreTape {
 public:
  JacobianTape(const ScoreModel& model, Matrix points, Matrix scores, int t,
               std::function<Matrix(const Vector&, int)> jac)
      : ScoreTape(model, std::move(scores)), points_(std::move(points)), t_(t), jac_(std::move(jac)) {}

 protected:
  Matrix eval_vjp(const Matrix& cotangents) const override {
    Matrix out(cotangents.rows(), cotangents.cols());
    for (Eigen::Index j = 0; j < cotangents.cols(); ++j) {
      out.col(j) = jac_(points_.col(j), t_).transpose() * cotangents.col(j);
    }
    return out;
  }

 private:
  Matrix points_;
  int t_;
  std::function<Matrix(const Vector&, int)> jac_;
};

}  // namespace

std::unique_ptr<ScoreTape> ScoreModel::eval_record(const Matrix& xs, int t) const {
  Matrix scores = eval_scores(xs, t);
  return std::make_unique<JacobianTape>(*this, xs, std::move(scores), t,
                                        [this](const Vector& x, int s) { return eval_jacobian(x, s); });
}

Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                            double h) {
  require(h > 0.0, "finite-difference step must be positive");
  const Eigen::Index d = x.size();
  Matrix j(d, d);
  Vector probe = x;
  for (Eigen::Index c = 0; c < d; ++c) {
    probe[c] = x[c] + h;
    const Vector plus = f(probe);
    probe[c] = x[c] - h;
    const Vector minus = f(probe);
    probe[c] = x[c];
    if (!plus.allFinite() || !minus.allFinite()) {
      throw NumericalError("non-finite score while differencing coordinate " + std::to_string(c));
    }
    require(plus.size() == d && minus.size() == d, "function output dimension mismatch");
    j.col(c) = (plus - minus) / (2.0 * h);
  }
  return j;
}

double default_fd_step(const Vector& x) {
  return 1e-4 * (1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0));
}

Matrix finite_diff_jacobian(const ScoreModel& model, const Vector& x, int t,
                            std::optional<double> h) {
  // Goes through the public score() on purpose: the differences are genuine
  // score evaluations.
  return finite_diff_jacobian([&](const Vector& p) { return model.score(p, t); }, x,
                              h.value_or(default_fd_step(x)));
}

void GaussianMixture::validate() const {
  require(!weights.empty(), "mixture needs at least one component");
  require(means.size() == weights.size() && covariances.size() == weights.size(),
          "mixture weights, means and covariances differ in count");
  const Eigen::Index d = means.front().size();
  require(d > 0, "mixture dimension must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(std::isfinite(weights[i]) && weights[i] >= 0.0, "mixture weights must be non-negative");
    total += weights[i];
    require(means[i].size() == d && means[i].allFinite(), "mixture mean has wrong size or is not finite");
    const Matrix& cov = covariances[i];
    require(cov.rows() == d && cov.cols() == d, "covariance shape mismatch");
    require(cov.allFinite(), "covariance is not finite");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
            "covariance " + std::to_string(i) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() > 0.0,
            "covariance " + std::to_string(i) + " is not positive definite");
  }
  require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
}

GaussianMixture GaussianMixture::isotropic(std::vector<double> weights, std::vector<Vector> means,
                                           const std::vector<double>& variances) {
  require(variances.size() == means.size(), "one variance per component expected");
  GaussianMixture g;
  g.weights = std::move(weights);
  g.means = std::move(means);
  for (std::size_t i = 0; i < g.means.size(); ++i) {
    const auto d = g.means[i].size();
    g.covariances.push_back(variances[i] * Matrix::Identity(d, d));
  }
  g.validate();
  return g;
}

GaussianMixture GaussianMixture::single(const Vector& mean, double variance) {
  return isotropic({1.0}, {mean}, {variance});
}

namespace {

using Component = GmmScoreModel::Component;

std::vector<Component> components_at(const GaussianMixture& gmm, double alpha_bar) {
  std::vector<Component> out;
  const Eigen::Index d = gmm.dim();
  const double root = std::sqrt(alpha_bar);
  for (int i = 0; i < gmm.components(); ++i) {
    if (gmm.weights[i] <= 0.0) continue;
    Matrix cov = alpha_bar * gmm.covariances[i] + (1.0 - alpha_bar) * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("noised covariance of component " + std::to_string(i) + " is singular");
    }
    const Matrix l = llt.matrixL();
    Component c;
    c.log_weight = std::log(gmm.weights[i]);
    c.half_log_det = l.diagonal().array().log().sum();
    c.mean = root * gmm.means[i];
    c.precision = llt.solve(Matrix::Identity(d, d));
    c.precision = 0.5 * (c.precision + c.precision.transpose()).eval();
    out.push_back(std::move(c));
  }
  return out;
}

// Responsibilities (K x n) and per-component score directions Q_i = P_i (x - m_i).
void responsibilities(const std::vector<Component>& comps, const Matrix& xs, Matrix& resp,
                      std::vector<Matrix>& q) {
  const auto k = static_cast<Eigen::Index>(comps.size());
  resp.resize(k, xs.cols());
  q.resize(comps.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    const Component& c = comps[i];
    const Matrix diff = xs.colwise() - c.mean;
    q[i] = c.precision * diff;
    resp.row(i) = (c.log_weight - c.half_log_det) -
                  0.5 * (diff.array() * q[i].array()).colwise().sum();
  }
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    const double top = resp.col(j).maxCoeff();
    resp.col(j) = (resp.col(j).array() - top).exp();
    resp.col(j) /= resp.col(j).sum();
  }
}

Matrix mixture_scores(const std::vector<Component>& comps, const Matrix& xs) {
  Matrix resp;
  std::vector<Matrix> q;
  responsibilities(comps, xs, resp, q);
  Matrix scores = Matrix::Zero(xs.rows(), xs.cols());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    scores -= q[i] * resp.row(static_cast<Eigen::Index>(i)).asDiagonal();
  }
  return scores;
}

Matrix mixture_jacobian(const std::vector<Component>& comps, const Vector& x) {
  Matrix resp;
  std::vector<Matrix> q;
  Matrix xs = x;
  responsibilities(comps, xs, resp, q);
  const Eigen::Index d = x.size();
  Matrix jac = Matrix::Zero(d, d);
  Vector mean_g = Vector::Zero(d);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const double r = resp(static_cast<Eigen::Index>(i), 0);
    const Vector g = -q[i].col(0);
    jac += r * (g * g.transpose() - comps[i].precision);
    mean_g += r * g;
  }
  jac -= mean_g * mean_g.transpose();
  return 0.5 * (jac + jac.transpose());
}

void check_gmm_call(const GaussianMixture& gmm, const NoiseSchedule& schedule, const Vector& x,
                    int t) {
  require(x.size() == gmm.dim(), "point dimension does not match mixture dimension");
  require(t >= 0 && t <= schedule.steps(), "timestep outside 0..T");
}

}  // namespace

Vector gmm_marginal_score(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                          const Vector& x, int t) {
  gmm.validate();
  check_gmm_call(gmm, schedule, x, t);
  Matrix xs = x;
  return mixture_scores(components_at(gmm, schedule.alpha_bar(t)), xs).col(0);
}

Matrix gmm_score_jacobian(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                          const Vector& x, int t) {
  gmm.validate();
  check_gmm_call(gmm, schedule, x, t);
  return mixture_jacobian(components_at(gmm, schedule.alpha_bar(t)), x);
}

GmmScoreModel::GmmScoreModel(GaussianMixture gmm, NoiseSchedule schedule)
    : gmm_(std::move(gmm)), schedule_(std::move(schedule)) {
  gmm_.validate();
  by_step_.reserve(static_cast<std::size_t>(schedule_.steps()) + 1);
  for (int t = 0; t <= schedule_.steps(); ++t) {
    by_step_.push_back(components_at(gmm_, schedule_.alpha_bar(t)));
  }
}

Matrix GmmScoreModel::eval_scores(const Matrix& xs, int t) const {
  return mixture_scores(by_step_[static_cast<std::size_t>(t)], xs);
}

Matrix GmmScoreModel::eval_jacobian(const Vector& x, int t) const {
  return mixture_jacobian(by_step_[static_cast<std::size_t>(t)], x);
}

FunctionScoreModel::FunctionScoreModel(int dim, NoiseSchedule schedule, Fn fn)
    : dim_(dim), schedule_(std::move(schedule)), fn_(std::move(fn)) {
  require(dim > 0, "dimension must be positive");
}

Matrix FunctionScoreModel::eval_scores(const Matrix& xs, int t) const {
  Matrix out(xs.rows(), xs.cols());
  for (Eigen::Index j = 0; j < xs.cols(); ++j) out.col(j) = fn_(xs.col(j), t);
  return out;
}

Vector eps_to_score(const Vector& eps, const NoiseSchedule& schedule, int t) {
  const double ab = schedule.alpha_bar(t);
  require(t >= 1 && ab < 1.0, "eps/score conversion needs alpha_bar_t < 1");
  return -eps / std::sqrt(1.0 - ab);
}

Vector score_to_eps(const Vector& score, const NoiseSchedule& schedule, int t) {
  const double ab = schedule.alpha_bar(t);
  require(t >= 1 && ab < 1.0, "eps/score conversion needs alpha_bar_t < 1");
  return -std::sqrt(1.0 - ab) * score;
}

}  // namespace ficd
