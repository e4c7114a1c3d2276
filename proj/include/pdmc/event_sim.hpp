#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "pdmc/errors.hpp"
#include "pdmc/rng.hpp"

namespace pdmc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Affine upper envelope lambda_bar(u) = max(a + b*u, 0) for Poisson thinning.
struct AffineRateBound {
  double intercept = 0.0;   // a, must be >= 0
  double slope = 0.0;       // b, any sign
  double horizon = kInf;    // validity window; kInf when global

  double value(double u) const { return std::max(intercept + slope * u, 0.0); }
};

/// Solves integral_0^tau max(a + b*s, 0) ds = r for tau. Returns kInf when the
/// total mass never reaches r (zero rate, or decaying envelope with b < 0).
inline double invert_affine_arrival(double a, double b, double r) {
  if (a < 0.0) throw NegativeIntercept("affine rate bound has negative intercept");
  if (b > 0.0) {
    const double q = a / b;
    return -q + std::sqrt(q * q + 2.0 * r / b);
  }
  if (b == 0.0) {
    if (a == 0.0) return kInf;
    return r / a;
  }
  // b < 0: envelope hits zero at a/|b|; total mass a^2 / (2|b|).
  const double ab = -b;
  const double mass = a * a / (2.0 * ab);
  if (r > mass) return kInf;
  const double q = a / ab;
  return q - std::sqrt(std::max(q * q - 2.0 * r / ab, 0.0));
}

/// First arrival of an inhomogeneous Poisson process with affine envelope,
/// by exact inversion of the cumulative rate against an Exp(1) draw.
inline double first_arrival_affine(const AffineRateBound& bound, Rng& rng) {
  return invert_affine_arrival(bound.intercept, bound.slope, rng.exponential());
}

/// Accept a proposed event with probability true_rate / bound_rate. A true
/// rate exceeding the bound means the bound builder is broken, which
/// invalidates thinning; that is a hard error, never a clamp.
inline bool thinning_accept(double true_rate, double bound_rate, Rng& rng) {
  if (true_rate > bound_rate * (1.0 + 1e-9)) {
    throw BoundViolation("thinning bound violated: rate " + std::to_string(true_rate) +
                         " > bound " + std::to_string(bound_rate));
  }
  if (true_rate < 0.0) throw NonFiniteRate("negative rate in thinning_accept");
  if (bound_rate == 0.0) return false;
  return rng.uniform() * bound_rate < true_rate;
}

namespace detail {

// Adaptive Simpson on [lo, hi].
inline double adaptive_simpson(const std::function<double(double)>& f, double lo,
                               double hi, double flo, double fmid, double fhi,
                               double whole, double tol, int depth) {
  const double mid = 0.5 * (lo + hi);
  const double lmid = 0.5 * (lo + mid);
  const double rmid = 0.5 * (mid + hi);
  const double flmid = f(lmid);
  const double frmid = f(rmid);
  const double left = (mid - lo) / 6.0 * (flo + 4.0 * flmid + fmid);
  const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frmid + fhi);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, lo, mid, flo, flmid, fmid, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, mid, hi, fmid, frmid, fhi, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double lo, double hi,
                        double tol) {
  if (hi <= lo) return 0.0;
  const double flo = f(lo);
  const double fhi = f(hi);
  const double fmid = f(0.5 * (lo + hi));
  const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  return adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, tol, 40);
}

}  // namespace detail

/// First arrival for a general nonnegative rate on [0, horizon]: the
/// cumulative integral is computed by adaptive quadrature and inverted by
/// bisection to absolute tolerance 1e-10. Returns kInf if the mass up to the
/// horizon is below the Exp(1) draw.
inline double first_arrival_numeric(const std::function<double(double)>& rate,
                                    double horizon, Rng& rng) {
  const double r = rng.exponential();
  const auto cumulative = [&](double u) { return detail::integrate(rate, 0.0, u, 1e-12); };

  // Monotonicity check on a coarse grid of the cumulative rate.
  double prev = 0.0;
  for (int k = 1; k <= 16; ++k) {
    const double cur = cumulative(horizon * k / 16.0);
    if (cur < prev - 1e-12 * (1.0 + std::abs(prev))) {
      throw NonMonotoneIntegral("cumulative rate decreased; rate must be nonnegative");
    }
    prev = cur;
  }
  if (prev < r) return kInf;

  double lo = 0.0, hi = horizon;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (cumulative(mid) < r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pdmc
