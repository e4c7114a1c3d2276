#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <utility>

#include "pdmc/errors.hpp"
#include "pdmc/event_sim.hpp"
#include "pdmc/model.hpp"
#include "pdmc/polytope.hpp"
#include "pdmc/rng.hpp"
#include "pdmc/trajectory.hpp"

namespace pdmc {

/// lambda_BPS(x, v) = max(v . gradU(x), 0).
inline double bps_rate(const Eigen::VectorXd& grad_u, const Eigen::VectorXd& v) {
  return std::max(v.dot(grad_u), 0.0);
}

/// Reflect v across the hyperplane orthogonal to gradU:
/// v - 2 (v.g / ||g||^2) g. Norm-preserving involution.
inline Eigen::VectorXd bps_bounce(const Eigen::VectorXd& v,
                                  const Eigen::VectorXd& grad_u) {
  const double g2 = grad_u.squaredNorm();
  if (g2 < 1e-300) throw ZeroGradient("bps_bounce: gradient too small to reflect");
  return v - (2.0 * v.dot(grad_u) / g2) * grad_u;
}

/// Fresh velocity from rho.
inline Eigen::VectorXd bps_refresh(VelocityLaw law, int dim, Rng& rng) {
  return law == VelocityLaw::uniform_sphere ? rng.unit_sphere(dim)
                                            : rng.gaussian_vector(dim);
}

/// Coordinatewise lambda_i = max(v_i dU/dx_i, 0).
inline Eigen::VectorXd zigzag_rates(const Eigen::VectorXd& grad_u,
                                    const Eigen::VectorXd& v) {
  return v.cwiseProduct(grad_u).cwiseMax(0.0);
}

/// Flip component i (0-based), leaving the rest unchanged.
inline Eigen::VectorXd zigzag_flip(const Eigen::VectorXd& v, int i) {
  Eigen::VectorXd out = v;
  out(i) = -out(i);
  return out;
}

struct BpsSpec {
  VelocityLaw velocity_law = VelocityLaw::uniform_sphere;
  double refresh_rate = 1.0;
  std::optional<Eigen::MatrixXd> preconditioner;
};

struct ZigZagSpec {
  int dimension = 1;
};

/// Rate evaluation at a proposed event point. Carries the gradient (or its
/// subsampled estimate) so that the switch kernel on acceptance uses exactly
/// the same estimate as the accept/reject test.
struct RateEval {
  double rate = 0.0;
  Eigen::VectorXd grad;
  long datum_index = -1;  // subsample index when applicable
};

/// The sampler-specific pieces the simulation loop needs: per-clock rate
/// envelopes valid along the current excursion, true rates at proposal
/// points, and the switch kernels. Owns the per-chain gradient-evaluation
/// counter.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual int clock_count() const = 0;

  /// Envelope for clock i, valid along u -> (x + u v, v) from state s.
  virtual AffineRateBound clock_bound(int i, const State& s) = 0;

  /// True rate of clock i at state s (already advanced to the proposal point).
  virtual RateEval clock_rate(int i, const State& s, Rng& rng) = 0;

  /// Velocity after an accepted event of clock i.
  virtual Eigen::VectorXd apply_switch(int i, const State& s, const RateEval& eval,
                                       Rng& rng) = 0;

  virtual EventKind switch_kind(int i) const { (void)i; return EventKind::switch_clock; }

  virtual Eigen::VectorXd initial_velocity(int dim, Rng& rng) const = 0;

  long grad_evals() const { return grad_evals_; }

 protected:
  long grad_evals_ = 0;
};

/// Bouncy Particle Sampler on the full-data gradient. Clock 0 bounces, clock 1
/// (present when refresh_rate > 0) refreshes; running refreshment as a second
/// Poisson clock is equivalent in law to the mixture kernel by superposition.
class BpsDynamics : public Dynamics {
 public:
  BpsDynamics(std::shared_ptr<const TargetModel> model, BpsSpec spec)
      : model_(std::move(model)), spec_(spec) {
    if (spec_.refresh_rate < 0.0) throw ConfigError("refresh_rate must be >= 0");
    if (spec_.refresh_rate == 0.0) {
      std::cerr << "warning: BPS with refresh_rate = 0 risks reducibility\n";
    }
  }

  int clock_count() const override { return spec_.refresh_rate > 0.0 ? 2 : 1; }

  AffineRateBound clock_bound(int i, const State& s) override {
    if (i == 1) return AffineRateBound{spec_.refresh_rate, 0.0};
    if (auto aff = model_->directional_affine(s.x, s.v)) {
      // Exact: the rate is max(a + b u, 0) itself, so thinning always accepts.
      return AffineRateBound{std::max(aff->a, 0.0), aff->b};
    }
    grad_evals_ += model_->data_count();
    const double a = bps_rate(model_->full_gradient(s.x), s.v);
    const double h = model_->hessian_norm_bound();
    if (!std::isfinite(h)) {
      throw ConfigError("BPS needs directional_affine or a finite Hessian bound");
    }
    // |d/du v.gradU(x+uv)| <= ||H|| ||v||^2.
    return AffineRateBound{a, h * s.v.squaredNorm()};
  }

  RateEval clock_rate(int i, const State& s, Rng& /*rng*/) override {
    if (i == 1) return RateEval{spec_.refresh_rate, {}, -1};
    grad_evals_ += model_->data_count();
    RateEval eval;
    eval.grad = model_->full_gradient(s.x);
    eval.rate = bps_rate(eval.grad, s.v);
    return eval;
  }

  Eigen::VectorXd apply_switch(int i, const State& s, const RateEval& eval,
                               Rng& rng) override {
    if (i == 1) return bps_refresh(spec_.velocity_law, static_cast<int>(s.v.size()), rng);
    return bps_bounce(s.v, eval.grad);
  }

  EventKind switch_kind(int i) const override {
    return i == 1 ? EventKind::refresh : EventKind::switch_clock;
  }

  Eigen::VectorXd initial_velocity(int dim, Rng& rng) const override {
    return bps_refresh(spec_.velocity_law, dim, rng);
  }

 private:
  std::shared_ptr<const TargetModel> model_;
  BpsSpec spec_;
};

/// Zig-Zag: d clocks with coordinatewise rates and single-coordinate flips.
class ZigZagDynamics : public Dynamics {
 public:
  explicit ZigZagDynamics(std::shared_ptr<const TargetModel> model)
      : model_(std::move(model)) {}

  int clock_count() const override { return model_->dim(); }

  AffineRateBound clock_bound(int i, const State& s) override {
    if (auto aff = model_->coordinate_affine(s.x, s.v, i)) {
      const double a = s.v(i) * aff->a;
      const double b = s.v(i) * aff->b;
      return AffineRateBound{std::max(a, 0.0), b};
    }
    grad_evals_ += model_->data_count();
    const double a = std::max(s.v(i) * model_->full_gradient(s.x)(i), 0.0);
    const double h = model_->hessian_norm_bound();
    if (!std::isfinite(h)) {
      throw ConfigError("Zig-Zag needs coordinate_affine or a finite Hessian bound");
    }
    // |d/du dU_i(x+uv)| <= ||H|| ||v|| = ||H|| sqrt(d) for v in {-1,+1}^d.
    return AffineRateBound{a, h * s.v.norm()};
  }

  RateEval clock_rate(int i, const State& s, Rng& /*rng*/) override {
    grad_evals_ += model_->data_count();
    RateEval eval;
    eval.grad = model_->full_gradient(s.x);
    eval.rate = std::max(s.v(i) * eval.grad(i), 0.0);
    return eval;
  }

  Eigen::VectorXd apply_switch(int i, const State& s, const RateEval& /*eval*/,
                               Rng& /*rng*/) override {
    return zigzag_flip(s.v, i);
  }

  Eigen::VectorXd initial_velocity(int dim, Rng& rng) const override {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v(j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return v;
  }

 private:
  std::shared_ptr<const TargetModel> model_;
};

/// Mass-matrix change of variables x = C y with M = C C'. Sampling runs in
/// y-space with isotropic rho; constraints map to g' = C' g and results map
/// back through C.
struct Preconditioned {
  std::shared_ptr<TargetModel> model;
  Polytope domain;
  Eigen::MatrixXd transform;  // C
};

namespace detail {

class TransformedModel : public TargetModel {
 public:
  TransformedModel(std::shared_ptr<const TargetModel> base, Eigen::MatrixXd c)
      : base_(std::move(base)), c_(std::move(c)) {}

  int dim() const override { return base_->dim(); }
  long data_count() const override { return base_->data_count(); }

  double potential(const Eigen::VectorXd& y) const override {
    return base_->potential(c_ * y);
  }
  Eigen::VectorXd full_gradient(const Eigen::VectorXd& y) const override {
    return c_.transpose() * base_->full_gradient(c_ * y);
  }
  Eigen::VectorXd per_datum_gradient(long i, const Eigen::VectorXd& y) const override {
    return c_.transpose() * base_->per_datum_gradient(i, c_ * y);
  }
  double hessian_norm_bound() const override {
    const double s = c_.operatorNorm();
    return base_->hessian_norm_bound() * s * s;
  }
  std::optional<AffineDirectional> directional_affine(
      const Eigen::VectorXd& y, const Eigen::VectorXd& v) const override {
    return base_->directional_affine(c_ * y, c_ * v);
  }

 private:
  std::shared_ptr<const TargetModel> base_;
  Eigen::MatrixXd c_;
};

}  // namespace detail

inline Preconditioned precondition(const Eigen::MatrixXd& mass,
                                   std::shared_ptr<const TargetModel> model,
                                   const Polytope& domain) {
  Eigen::LLT<Eigen::MatrixXd> llt(mass);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("preconditioner must be symmetric positive definite");
  }
  const Eigen::MatrixXd c = llt.matrixL();
  Eigen::MatrixXd g = domain.normals() * c;  // rows g_m' = g_m C = (C' g_m)'
  return Preconditioned{
      std::make_shared<detail::TransformedModel>(std::move(model), c),
      Polytope(std::move(g), domain.offsets()), c};
}

}  // namespace pdmc
