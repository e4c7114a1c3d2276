#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <optional>
#include <utility>

#include "pdmc/errors.hpp"

namespace pdmc {

/// Directional derivative of the potential along a ray when it happens to be
/// exactly affine in the ray parameter: v . gradU(x + u v) = a + b u.
struct AffineDirectional {
  double a;
  double b;
};

/// Target pi(x) ~ exp(-U(x)) with U split into data_count() additive terms.
/// Evaluations are pure; instances are immutable after construction and may
/// be shared across chains.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int dim() const = 0;
  virtual long data_count() const { return 1; }

  virtual double potential(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const = 0;

  /// Gradient of the i-th negative-log term, scaled so the sum over i equals
  /// the full gradient.
  virtual Eigen::VectorXd per_datum_gradient(long i, const Eigen::VectorXd& x) const {
    if (i != 0) throw Error("per_datum_gradient: model has a single term");
    return full_gradient(x);
  }

  /// One-pass U(x) and gradU(x), for samplers that need both.
  virtual std::pair<double, Eigen::VectorXd> potential_and_gradient(
      const Eigen::VectorXd& x) const {
    return {potential(x), full_gradient(x)};
  }

  /// Uniform bound on the spectral norm of the full Hessian, infinity when
  /// unknown. Used to build affine thinning envelopes for generic targets.
  virtual double hessian_norm_bound() const {
    return std::numeric_limits<double>::infinity();
  }

  /// Exact affine form of u -> v . gradU(x + u v), available for quadratic
  /// potentials; lets samplers skip conservative envelopes.
  virtual std::optional<AffineDirectional> directional_affine(
      const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& /*v*/) const {
    return std::nullopt;
  }

  /// Exact affine form of u -> gradU(x + u v)_i, coordinatewise counterpart.
  virtual std::optional<AffineDirectional> coordinate_affine(
      const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& /*v*/, int /*i*/) const {
    return std::nullopt;
  }
};

/// Gaussian N(mu, Sigma) validation target: U(x) = (x-mu)' Sigma^-1 (x-mu) / 2.
class GaussianTarget : public TargetModel {
 public:
  GaussianTarget(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma)
      : mu_(std::move(mu)) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("gaussian target: covariance not positive definite");
    }
    precision_ = llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  }

  static GaussianTarget standard(int d) {
    return GaussianTarget(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
  }

  int dim() const override { return static_cast<int>(mu_.size()); }

  double potential(const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd r = x - mu_;
    return 0.5 * r.dot(precision_ * r);
  }

  Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const override {
    return precision_ * (x - mu_);
  }

  double hessian_norm_bound() const override {
    return precision_.selfadjointView<Eigen::Lower>().operatorNorm();
  }

  std::optional<AffineDirectional> directional_affine(
      const Eigen::VectorXd& x, const Eigen::VectorXd& v) const override {
    const Eigen::VectorXd pv = precision_ * v;
    return AffineDirectional{v.dot(precision_ * (x - mu_)), v.dot(pv)};
  }

  std::optional<AffineDirectional> coordinate_affine(
      const Eigen::VectorXd& x, const Eigen::VectorXd& v, int i) const override {
    const Eigen::VectorXd g = precision_ * (x - mu_);
    const Eigen::VectorXd pv = precision_ * v;
    return AffineDirectional{g(i), pv(i)};
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd precision_;
};

}  // namespace pdmc
