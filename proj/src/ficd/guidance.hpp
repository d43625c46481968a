// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ficd/common.hpp"
#include "ficd/posterior.hpp"
#include "ficd/score_model.hpp"

namespace ficd {

/// The measurement c that guidance steers toward.
struct Condition {
  enum class Kind { kPoint, kLinear, kFeatures };

  Kind kind = Kind::kPoint;
  Vector y;         // target point or measurement
  Matrix a;         // m x d measurement operator (kLinear)
  Matrix features;  // reference feature matrix (kFeatures)

  static Condition point(Vector y);
  static Condition linear(Matrix a, Vector y);
  static Condition reference_features(Matrix features);
};

std::string_view to_string(Condition::Kind kind);
Condition::Kind parse_condition_kind(std::string_view text);

/// Differentiable measurement e(x0_hat, c) >= 0.
class EnergyFunction {
 public:
  virtual ~EnergyFunction() = default;

  virtual std::string name() const = 0;
  virtual double value(const Vector& x0, const Condition& c) const = 0;
  virtual Vector grad(const Vector& x0, const Condition& c) const = 0;
  /// Global bound on |grad| when one exists.
  virtual std::optional<double> lipschitz_bound() const { return std::nullopt; }
  /// Throws InvalidArgument when c cannot be paired with points of dimension d.
  virtual void check(const Condition& c, int d) const = 0;

  /// Column-wise gradients.
  virtual Matrix grad_batch(const Matrix& x0s, const Condition& c) const;
};

/// |x0 - c|^2.
class QuadraticEnergy final : public EnergyFunction {
 public:
  std::string name() const override { return "quadratic"; }
  double value(const Vector& x0, const Condition& c) const override;
  Vector grad(const Vector& x0, const Condition& c) const override;
  void check(const Condition& c, int d) const override;
  Matrix grad_batch(const Matrix& x0s, const Condition& c) const override;
};

/// |x0 - c|; unit-norm gradient, zero at x0 = c. kappa = 1.
class DistanceEnergy final : public EnergyFunction {
 public:
  std::string name() const override { return "distance"; }
  double value(const Vector& x0, const Condition& c) const override;
  Vector grad(const Vector& x0, const Condition& c) const override;
  std::optional<double> lipschitz_bound() const override { return 1.0; }
  void check(const Condition& c, int d) const override;
};

/// |A x0 - y|^2.
class LinearMeasurementEnergy final : public EnergyFunction {
 public:
  std::string name() const override { return "linear"; }
  double value(const Vector& x0, const Condition& c) const override;
  Vector grad(const Vector& x0, const Condition& c) const override;
  void check(const Condition& c, int d) const override;
  Matrix grad_batch(const Matrix& x0s, const Condition& c) const override;
};

/// Linear map from R^d to a rows x cols feature matrix: vec(F) = W x
/// (column-major vec).
struct LinearFeatureMap {
  int rows = 1;
  int cols = 1;
  Matrix w;  // (rows*cols) x d

  /// F = reshape(x) with the given number of rows.
  static LinearFeatureMap reshape(int d, int rows);
  Matrix apply(const Vector& x) const;
  void validate(int d) const;
};

/// |F F^T - Fc Fc^T|_F^2 with F the features of x0 and Fc the reference.
class GramEnergy final : public EnergyFunction {
 public:
  explicit GramEnergy(LinearFeatureMap map);

  std::string name() const override { return "gram"; }
  double value(const Vector& x0, const Condition& c) const override;
  Vector grad(const Vector& x0, const Condition& c) const override;
  void check(const Condition& c, int d) const override;
  const LinearFeatureMap& feature_map() const { return map_; }

 private:
  LinearFeatureMap map_;
};

/// Builds an energy by name: quadratic, distance, linear, gram.
std::unique_ptr<EnergyFunction> make_energy(std::string_view kind, int dim,
                                            std::optional<LinearFeatureMap> map = std::nullopt);

/// Batch evaluation of the conditional term for one timestep.
struct GuidanceBatch {
  Matrix scores;       // d x n
  Matrix x0;           // Tweedie means
  Matrix energy_grad;  // lambda * grad e(x0), before the posterior part
  Matrix gradient;     // conditional-term gradient
  double coefficient = 0.0;  // scalar posterior coefficient; NaN for EXACT
};

/// Conditional-term gradient for every column of xs. EXACT pulls the energy
/// gradient back through the posterior Jacobian with one VJP per column;
/// the scalar strategies never differentiate the score.
GuidanceBatch conditional_term_batch(Strategy strategy, const ScoreModel& model,
                                     const EnergyFunction& energy, const Matrix& xs, int t,
                                     const Condition& c, double lambda);

Vector conditional_term_gradient(Strategy strategy, const ScoreModel& model,
                                 const EnergyFunction& energy, const Vector& x, int t,
                                 const Condition& c, double lambda);

double guidance_gradient_norm(const Vector& gradient);

}  // namespace ficd
