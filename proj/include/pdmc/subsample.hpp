#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>

#include "pdmc/errors.hpp"
#include "pdmc/event_sim.hpp"
#include "pdmc/model.hpp"
#include "pdmc/polytope.hpp"
#include "pdmc/rng.hpp"
#include "pdmc/samplers.hpp"

namespace pdmc {

/// Reference point x_hat with the precomputed full gradient, the per-datum
/// Hessian eigenvalue bound L and the cached per-datum gradients at x_hat.
struct ControlVariate {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd grad_at_hat;
  double lipschitz = 0.0;        // L
  long data_count = 0;           // N
  Eigen::MatrixXd per_datum_at_hat;  // d x N cache of grad log-term_i(x_hat)
};

inline ControlVariate make_control_variate(const TargetModel& model,
                                           const Eigen::VectorXd& x_hat,
                                           double lipschitz) {
  ControlVariate cv;
  cv.x_hat = x_hat;
  cv.lipschitz = lipschitz;
  cv.data_count = model.data_count();
  cv.per_datum_at_hat.resize(model.dim(), cv.data_count);
  for (long i = 0; i < cv.data_count; ++i) {
    cv.per_datum_at_hat.col(i) = model.per_datum_gradient(i, x_hat);
  }
  cv.grad_at_hat = cv.per_datum_at_hat.rowwise().sum();
  return cv;
}

/// Unbiased single-datum gradient estimate with fixed index:
/// gradU(x_hat) + N [ grad log-term_I(x) - grad log-term_I(x_hat) ].
inline Eigen::VectorXd estimate_grad_at(const ControlVariate& cv,
                                        const TargetModel& model,
                                        const Eigen::VectorXd& x, long index) {
  const double n = static_cast<double>(cv.data_count);
  return cv.grad_at_hat +
         n * (model.per_datum_gradient(index, x) - cv.per_datum_at_hat.col(index));
}

/// Same estimator with I drawn uniformly from {0..N-1}.
inline std::pair<Eigen::VectorXd, long> estimate_grad(const ControlVariate& cv,
                                                      const TargetModel& model,
                                                      const Eigen::VectorXd& x,
                                                      Rng& rng) {
  const long index = rng.uniform_int(cv.data_count);
  return {estimate_grad_at(cv, model, x, index), index};
}

/// Envelope valid for every subsample realization along x + u v, ||v|| = 1:
/// a = max(0, gradU(x_hat).v) + N L ||x - x_hat||, b = N L.
inline AffineRateBound affine_bound_bps(const ControlVariate& cv,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& v) {
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw NonUnitVelocity("affine_bound_bps requires a unit velocity");
  }
  const double nl = static_cast<double>(cv.data_count) * cv.lipschitz;
  const double a = std::max(0.0, cv.grad_at_hat.dot(v)) + nl * (x - cv.x_hat).norm();
  return AffineRateBound{a, nl};
}

/// Dykstra alternating projection onto the half-spaces, shrunk inward by
/// `margin` along each unit normal so the result stays strictly feasible.
inline Eigen::VectorXd project_polytope(const Polytope& domain,
                                        const Eigen::VectorXd& point,
                                        double margin = 0.0) {
  const int m = domain.num_constraints();
  if (m == 0) return point;
  Eigen::VectorXd x = point;
  Eigen::MatrixXd corrections = Eigen::MatrixXd::Zero(x.size(), m);
  for (int sweep = 0; sweep < 500; ++sweep) {
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd g = domain.normals().row(i);
      const double gn = g.norm();
      const double c = domain.offsets()(i) - margin * gn;
      const Eigen::VectorXd y = x + corrections.col(i);
      const double excess = g.dot(y) - c;
      Eigen::VectorXd projected = y;
      if (excess > 0.0) projected -= (excess / (gn * gn)) * g;
      corrections.col(i) = y - projected;
      x = projected;
    }
    // Violation measured with the end-of-sweep point: per-constraint checks
    // taken right after each projection are trivially satisfied.
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd g = domain.normals().row(i);
      const double gn = g.norm();
      const double c = domain.offsets()(i) - margin * gn;
      worst = std::max(worst, (g.dot(x) - c) / gn);
    }
    if (worst <= 1e-10) break;
  }
  return x;
}

/// Preprocessing: projected gradient descent toward the posterior mode
/// (backtracking line search, 200 iterations), then one exact O(N) pass for
/// the full gradient and the per-datum cache at x_hat.
inline ControlVariate find_reference(const TargetModel& model, const Polytope& domain,
                                     const Eigen::VectorXd& start, double lipschitz) {
  if (!domain.strictly_inside(start)) {
    throw InvalidStart("find_reference: start point not strictly inside domain");
  }
  constexpr double kMargin = 1e-6;
  Eigen::VectorXd x = start;
  double u = model.potential(x);
  if (!std::isfinite(u)) throw NonFinitePotential("non-finite potential at start");
  double step = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd g = model.full_gradient(x);
    if (!g.allFinite()) throw NonFinitePotential("non-finite gradient during descent");
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd cand = project_polytope(domain, x - step * g, kMargin);
      const double uc = model.potential(cand);
      if (!std::isfinite(uc)) throw NonFinitePotential("non-finite potential during descent");
      if (uc < u - 1e-12 * std::abs(u)) {
        x = cand;
        u = uc;
        moved = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return make_control_variate(model, x, lipschitz);
}

/// Subsampled BPS: one bounce clock driven by the control-variate estimator
/// plus an optional refresh clock. The estimate drawn in the accept test is
/// the one the bounce uses (carried through RateEval).
class SubsampledBpsDynamics : public Dynamics {
 public:
  SubsampledBpsDynamics(std::shared_ptr<const TargetModel> model, ControlVariate cv,
                        BpsSpec spec)
      : model_(std::move(model)), cv_(std::move(cv)), spec_(spec) {
    if (spec_.velocity_law != VelocityLaw::uniform_sphere) {
      throw ConfigError("subsampled BPS requires unit velocities (uniform_sphere)");
    }
  }

  const ControlVariate& control_variate() const { return cv_; }

  int clock_count() const override { return spec_.refresh_rate > 0.0 ? 2 : 1; }

  AffineRateBound clock_bound(int i, const State& s) override {
    if (i == 1) return AffineRateBound{spec_.refresh_rate, 0.0};
    return affine_bound_bps(cv_, s.x, s.v);
  }

  RateEval clock_rate(int i, const State& s, Rng& rng) override {
    if (i == 1) return RateEval{spec_.refresh_rate, {}, -1};
    // One fresh per-datum evaluation; the x_hat term comes from the cache.
    grad_evals_ += 1;
    RateEval eval;
    auto [grad, index] = estimate_grad(cv_, *model_, s.x, rng);
    eval.grad = std::move(grad);
    eval.datum_index = index;
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
    return rng.unit_sphere(dim);
  }

 private:
  std::shared_ptr<const TargetModel> model_;
  ControlVariate cv_;
  BpsSpec spec_;
};

}  // namespace pdmc
