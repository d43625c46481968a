// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/guidance.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ficd {

Condition Condition::point(Vector y) {
  Condition c;
  c.kind = Kind::kPoint;
  c.y = std::move(y);
  return c;
}

Condition Condition::linear(Matrix a, Vector y) {
  Condition c;
  c.kind = Kind::kLinear;
  c.a = std::move(a);
  c.y = std::move(y);
  return c;
}

Condition Condition::reference_features(Matrix features) {
  Condition c;
  c.kind = Kind::kFeatures;
  c.features = std::move(features);
  return c;
}

std::string_view to_string(Condition::Kind kind) {
  switch (kind) {
    case Condition::Kind::kPoint: return "point";
    case Condition::Kind::kLinear: return "linear";
    case Condition::Kind::kFeatures: return "features";
  }
  return "?";
}

Condition::Kind parse_condition_kind(std::string_view text) {
  if (text == "point") return Condition::Kind::kPoint;
  if (text == "linear") return Condition::Kind::kLinear;
  if (text == "features") return Condition::Kind::kFeatures;
  throw InvalidArgument("unknown condition kind '" + std::string(text) + "'");
}

Matrix EnergyFunction::grad_batch(const Matrix& x0s, const Condition& c) const {
  Matrix out(x0s.rows(), x0s.cols());
  for (Eigen::Index j = 0; j < x0s.cols(); ++j) out.col(j) = grad(x0s.col(j), c);
  return out;
}

namespace {

void check_point(const Condition& c, int d, const char* energy) {
  require(c.kind == Condition::Kind::kPoint, std::string(energy) + " energy needs a point condition");
  require(c.y.size() == d, std::string(energy) + " energy: target has dimension " +
                               std::to_string(c.y.size()) + ", expected " + std::to_string(d));
}

}  // namespace

double QuadraticEnergy::value(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  return (x0 - c.y).squaredNorm();
}

Vector QuadraticEnergy::grad(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  return 2.0 * (x0 - c.y);
}

Matrix QuadraticEnergy::grad_batch(const Matrix& x0s, const Condition& c) const {
  check(c, static_cast<int>(x0s.rows()));
  return 2.0 * (x0s.colwise() - c.y);
}

void QuadraticEnergy::check(const Condition& c, int d) const { check_point(c, d, "quadratic"); }

double DistanceEnergy::value(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  return (x0 - c.y).norm();
}

Vector DistanceEnergy::grad(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  const Vector diff = x0 - c.y;
  const double n = diff.norm();
  if (n == 0.0) return Vector::Zero(x0.size());
  return diff / n;
}

void DistanceEnergy::check(const Condition& c, int d) const { check_point(c, d, "distance"); }

void LinearMeasurementEnergy::check(const Condition& c, int d) const {
  require(c.kind == Condition::Kind::kLinear, "linear energy needs a linear measurement condition");
  require(c.a.cols() == d, "measurement operator has " + std::to_string(c.a.cols()) +
                               " columns, expected " + std::to_string(d));
  require(c.a.rows() == c.y.size(), "measurement operator rows do not match y");
}

double LinearMeasurementEnergy::value(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  return (c.a * x0 - c.y).squaredNorm();
}

Vector LinearMeasurementEnergy::grad(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  return 2.0 * c.a.transpose() * (c.a * x0 - c.y);
}

Matrix LinearMeasurementEnergy::grad_batch(const Matrix& x0s, const Condition& c) const {
  check(c, static_cast<int>(x0s.rows()));
  return 2.0 * c.a.transpose() * ((c.a * x0s).colwise() - c.y);
}

LinearFeatureMap LinearFeatureMap::reshape(int d, int rows) {
  require(rows > 0 && d % rows == 0, "reshape feature map: rows must divide the dimension");
  return {rows, d / rows, Matrix::Identity(d, d)};
}

void LinearFeatureMap::validate(int d) const {
  require(rows > 0 && cols > 0, "feature map shape must be positive");
  require(w.rows() == static_cast<Eigen::Index>(rows) * cols && w.cols() == d,
          "feature map matrix must be (rows*cols) x dim");
}

Matrix LinearFeatureMap::apply(const Vector& x) const {
  const Vector f = w * x;
  return Eigen::Map<const Matrix>(f.data(), rows, cols);
}

GramEnergy::GramEnergy(LinearFeatureMap map) : map_(std::move(map)) {}

void GramEnergy::check(const Condition& c, int d) const {
  map_.validate(d);
  require(c.kind == Condition::Kind::kFeatures, "gram energy needs a reference feature condition");
  require(c.features.rows() == map_.rows, "reference features have " + std::to_string(c.features.rows()) +
                                              " rows, feature map produces " + std::to_string(map_.rows));
}

double GramEnergy::value(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  const Matrix f = map_.apply(x0);
  return (f * f.transpose() - c.features * c.features.transpose()).squaredNorm();
}

Vector GramEnergy::grad(const Vector& x0, const Condition& c) const {
  check(c, static_cast<int>(x0.size()));
  const Matrix f = map_.apply(x0);
  const Matrix diff = f * f.transpose() - c.features * c.features.transpose();
  const Matrix df = 4.0 * diff * f;
  return map_.w.transpose() * Eigen::Map<const Vector>(df.data(), df.size());
}

std::unique_ptr<EnergyFunction> make_energy(std::string_view kind, int dim,
                                            std::optional<LinearFeatureMap> map) {
  if (kind == "quadratic") return std::make_unique<QuadraticEnergy>();
  if (kind == "distance") return std::make_unique<DistanceEnergy>();
  if (kind == "linear") return std::make_unique<LinearMeasurementEnergy>();
  if (kind == "gram") {
    LinearFeatureMap m = map ? *map : LinearFeatureMap::reshape(dim, 1);
    m.validate(dim);
    return std::make_unique<GramEnergy>(std::move(m));
  }
  throw InvalidArgument("unknown energy kind '" + std::string(kind) +
                        "' (expected quadratic, distance, linear or gram)");
}

GuidanceBatch conditional_term_batch(Strategy strategy, const ScoreModel& model,
                                     const EnergyFunction& energy, const Matrix& xs, int t,
                                     const Condition& c, double lambda) {
  require(std::isfinite(lambda), "lambda must be finite");
  energy.check(c, model.dim());
  const NoiseSchedule& schedule = model.schedule();
  const double ab = schedule.alpha_bar(t);
  GuidanceBatch out;
  std::unique_ptr<ScoreTape> tape;
  if (strategy == Strategy::kExact) {
    tape = model.record(xs, t);
    out.scores = tape->scores();
  } else {
    out.scores = model.score_batch(xs, t);
  }
  out.x0 = tweedie_from_scores(xs, out.scores, ab);
  out.energy_grad = lambda * energy.grad_batch(out.x0, c);
  if (strategy == Strategy::kExact) {
    // (d x0 / d x)^T g = (g + (1 - ab) J^T g) / sqrt(ab)
    out.gradient = (out.energy_grad + (1.0 - ab) * tape->vjp(out.energy_grad)) / std::sqrt(ab);
    out.coefficient = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.coefficient = posterior_coefficient(strategy, schedule, t);
    out.gradient = out.coefficient * out.energy_grad;
  }
  return out;
}

Vector conditional_term_gradient(Strategy strategy, const ScoreModel& model,
                                 const EnergyFunction& energy, const Vector& x, int t,
                                 const Condition& c, double lambda) {
  Matrix xs = x;
  const Vector g = conditional_term_batch(strategy, model, energy, xs, t, c, lambda).gradient.col(0);
  if (!g.allFinite()) throw NumericalError("conditional gradient is not finite at t = " + std::to_string(t));
  return g;
}

double guidance_gradient_norm(const Vector& gradient) { return gradient.norm(); }

}  // namespace ficd
