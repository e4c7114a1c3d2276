#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pdmc/diagnostics.hpp"
#include "pdmc/errors.hpp"
#include "pdmc/model.hpp"
#include "pdmc/polytope.hpp"
#include "pdmc/rng.hpp"

namespace pdmc {

/// Metropolis chain state with cached potential/gradient at the current point.
struct MhChainState {
  Eigen::VectorXd x;
  double potential_at_x = 0.0;
  Eigen::VectorXd grad_at_x;
  long accepted_count = 0;
  long proposed_count = 0;
};

inline MhChainState mh_init(const TargetModel& model, const Eigen::VectorXd& x,
                            long& datum_evals) {
  MhChainState s;
  s.x = x;
  auto [u, g] = model.potential_and_gradient(x);
  datum_evals += model.data_count();
  s.potential_at_x = u;
  s.grad_at_x = g;
  return s;
}

/// One MALA step. Proposals outside O are rejected outright (the target has
/// zero density there); otherwise the standard MALA acceptance ratio applies.
inline void mala_step(MhChainState& state, const TargetModel& model,
                      const Polytope& domain, double step_size, Rng& rng,
                      long& datum_evals) {
  ++state.proposed_count;
  const double h2 = step_size * step_size;
  const Eigen::VectorXd noise = rng.gaussian_vector(model.dim());
  const Eigen::VectorXd proposal =
      state.x - 0.5 * h2 * state.grad_at_x + step_size * noise;
  if (!domain.contains(proposal)) return;

  auto [u_prop, g_prop] = model.potential_and_gradient(proposal);
  datum_evals += model.data_count();

  const Eigen::VectorXd fwd_mean = state.x - 0.5 * h2 * state.grad_at_x;
  const Eigen::VectorXd bwd_mean = proposal - 0.5 * h2 * g_prop;
  const double log_fwd = -(proposal - fwd_mean).squaredNorm() / (2.0 * h2);
  const double log_bwd = -(state.x - bwd_mean).squaredNorm() / (2.0 * h2);
  const double log_alpha = state.potential_at_x - u_prop + log_bwd - log_fwd;

  if (std::log(1.0 - rng.uniform() + 1e-300) < log_alpha) {
    state.x = proposal;
    state.potential_at_x = u_prop;
    state.grad_at_x = std::move(g_prop);
    ++state.accepted_count;
  }
}

/// One HMC step with `leapfrog_steps` leapfrog updates. Any intermediate
/// position outside O rejects the whole proposal.
inline void hmc_step(MhChainState& state, const TargetModel& model,
                     const Polytope& domain, double step_size, int leapfrog_steps,
                     Rng& rng, long& datum_evals) {
  ++state.proposed_count;
  Eigen::VectorXd p = rng.gaussian_vector(model.dim());
  const double h0 = state.potential_at_x + 0.5 * p.squaredNorm();

  Eigen::VectorXd x = state.x;
  Eigen::VectorXd g = state.grad_at_x;
  for (int step = 0; step < leapfrog_steps; ++step) {
    p -= 0.5 * step_size * g;
    x += step_size * p;
    if (!domain.contains(x)) return;
    g = model.full_gradient(x);
    datum_evals += model.data_count();
    p -= 0.5 * step_size * g;
  }
  const double u_new = model.potential(x);
  datum_evals += model.data_count();
  const double h1 = u_new + 0.5 * p.squaredNorm();

  if (std::log(1.0 - rng.uniform() + 1e-300) < h0 - h1) {
    state.x = std::move(x);
    state.potential_at_x = u_new;
    state.grad_at_x = std::move(g);
    ++state.accepted_count;
  }
}

/// Grid tuning in the style of the baselines' protocol: run a short chain at
/// each step size (logarithmic grid, 10 sizes per decade over two decades
/// ending at `max_step`) and keep the one maximizing the ESS of f.
template <typename StepFn>
double tune_step_size(const TargetModel& model, const Polytope& domain,
                      const Eigen::VectorXd& start,
                      const std::function<double(const Eigen::VectorXd&)>& f,
                      double max_step, long steps_per_trial, std::uint64_t seed,
                      StepFn&& one_step) {
  double best_h = max_step;
  double best_ess = -1.0;
  for (int k = 0; k < 20; ++k) {
    const double h = max_step * std::pow(10.0, -k / 10.0);
    Rng rng(seed + static_cast<std::uint64_t>(k));
    long evals = 0;
    MhChainState chain = mh_init(model, start, evals);
    std::vector<double> samples;
    samples.reserve(steps_per_trial);
    for (long s = 0; s < steps_per_trial; ++s) {
      one_step(chain, h, rng, evals);
      samples.push_back(f(chain.x));
    }
    const double accept_frac =
        static_cast<double>(chain.accepted_count) / chain.proposed_count;
    if (accept_frac < 0.05) continue;  // boundary-dominated, chain barely moves
    const double ess = ess_batch_means(samples).ess;
    if (ess > best_ess) {
      best_ess = ess;
      best_h = h;
    }
  }
  return best_h;
}

}  // namespace pdmc
