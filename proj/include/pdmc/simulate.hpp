#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pdmc/errors.hpp"
#include "pdmc/event_sim.hpp"
#include "pdmc/polytope.hpp"
#include "pdmc/rng.hpp"
#include "pdmc/samplers.hpp"
#include "pdmc/trajectory.hpp"

namespace pdmc {

struct StopRule {
  static StopRule max_time(double t) { return StopRule{t, -1}; }
  static StopRule max_events(long n) { return StopRule{kInf, n}; }

  double time_horizon = kInf;
  long event_cap = -1;  // negative means unbounded
};

/// Boundary transition kernel Q_b. Specular reflection is the correctness
/// default; the velocity-resampling kernel is experimental (the inward retry
/// conditions the law, see resample_boundary).
struct BoundaryRule {
  enum class Kind { specular, resample } kind = Kind::specular;
  VelocityLaw resample_law = VelocityLaw::uniform_sphere;
  int retry_cap = 100;
};

namespace detail {
inline Trajectory finish(Trajectory&& traj, const Dynamics& dynamics) {
  traj.grad_evals = dynamics.grad_evals();
  return std::move(traj);
}
}  // namespace detail

/// Generic PDMP simulation loop. Per excursion: build per-clock envelopes
/// from the current state, draw proposed arrival times and the boundary hit
/// time, then either reflect (boundary first) or thin the earliest proposal.
/// Rejected proposals advance the position, keep the velocity, are not
/// recorded, and start a fresh excursion with rebuilt envelopes.
inline Trajectory simulate(const State& initial, Dynamics& dynamics,
                           const Polytope& domain, const StopRule& stop, Rng& rng,
                           const BoundaryRule& boundary = {}) {
  if (!domain.strictly_inside(initial.x)) {
    throw InvalidStart("simulate: initial position not strictly inside the domain");
  }
  Trajectory traj;
  traj.initial = initial;
  State state = initial;

  const int n_clocks = dynamics.clock_count();
  std::vector<AffineRateBound> bounds(n_clocks);
  long event_count = 0;
  int stuck_count = 0;
  double last_boundary_t = -kInf;
  Eigen::VectorXd last_boundary_x;

  auto emit_horizon = [&](double dt) {
    state = advance(state, dt);
    traj.events.push_back({state.t, state.x, state.v, EventKind::horizon, -1});
  };

  while (stop.event_cap < 0 || event_count < stop.event_cap) {
    const double remaining = stop.time_horizon - state.t;
    if (std::isfinite(stop.time_horizon) && remaining <= 0.0) break;

    double tau_prime = kInf;
    int i_min = -1;
    for (int i = 0; i < n_clocks; ++i) {
      bounds[i] = dynamics.clock_bound(i, state);
      double tau = first_arrival_affine(bounds[i], rng);
      if (tau > bounds[i].horizon) tau = kInf;
      if (tau < tau_prime) {
        tau_prime = tau;
        i_min = i;
      }
    }
    const BoundaryHit hit = domain.hit_time(state.x, state.v);

    if (remaining <= std::min(hit.tau_b, tau_prime)) {
      if (std::isfinite(remaining)) {
        emit_horizon(remaining);
        return detail::finish(std::move(traj), dynamics);
      }
      // No clock can fire, no boundary ahead, no time horizon: close out the
      // trajectory at the current time instead of spinning forever.
      emit_horizon(0.0);
      return detail::finish(std::move(traj), dynamics);
    }

    if (hit.tau_b <= tau_prime + 1e-12) {
      // Boundary first (ties go to the boundary so the chain stays inside O).
      state = advance(state, hit.tau_b);
      if (state.t == last_boundary_t && last_boundary_x.size() == state.x.size() &&
          (state.x - last_boundary_x).norm() == 0.0) {
        if (++stuck_count > boundary.retry_cap) {
          throw StuckAtBoundary("repeated zero-time boundary events at the same point");
        }
      } else {
        stuck_count = 0;
      }
      last_boundary_t = state.t;
      last_boundary_x = state.x;

      const Eigen::VectorXd n = domain.outward_normal(hit.face);
      Eigen::VectorXd v_new;
      if (boundary.kind == BoundaryRule::Kind::specular) {
        v_new = specular_reflect(state.v, n);
      } else {
        int tries = 0;
        do {
          if (++tries > boundary.retry_cap) {
            throw StuckAtBoundary("resampling kernel failed to draw an inward velocity");
          }
          v_new = resample_boundary(boundary.resample_law, domain.dim(), rng);
        } while (v_new.dot(n) > 0.0);
      }
      // Corner hits: reflect sequentially against the lowest outward-pointing
      // active face until the velocity points inward everywhere.
      for (int k = 0; k < boundary.retry_cap; ++k) {
        const int face2 = domain.first_outward_active_face(state.x, v_new);
        if (face2 < 0) break;
        v_new = specular_reflect(v_new, domain.outward_normal(face2));
      }
      state.v = v_new;
      traj.events.push_back({state.t, state.x, state.v, EventKind::reflect, hit.face});
      ++event_count;
      continue;
    }

    // Thinning step at the earliest proposal (ties among clocks already
    // resolved to the lowest index by the strict < in the argmin above).
    state = advance(state, tau_prime);
    const RateEval eval = dynamics.clock_rate(i_min, state, rng);
    if (!std::isfinite(eval.rate)) {
      throw NonFiniteRate("non-finite rate at proposed event");
    }
    if (thinning_accept(eval.rate, bounds[i_min].value(tau_prime), rng)) {
      state.v = dynamics.apply_switch(i_min, state, eval, rng);
      traj.events.push_back(
          {state.t, state.x, state.v, dynamics.switch_kind(i_min), i_min});
      ++event_count;
    }
    // Rejection: position advanced, velocity kept, envelopes rebuilt.
  }

  // Event cap reached (or horizon crossed exactly at an event time).
  return detail::finish(std::move(traj), dynamics);
}

}  // namespace pdmc
