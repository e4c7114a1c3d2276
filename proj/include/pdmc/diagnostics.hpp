#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pdmc/errors.hpp"
#include "pdmc/model.hpp"
#include "pdmc/rng.hpp"
#include "pdmc/samplers.hpp"
#include "pdmc/trajectory.hpp"

namespace pdmc {

/// Polynomial functional of position, f(x) = c + l.x + x'Qx; the family the
/// exact per-segment integrator supports. Leave quad empty for linear f.
struct PolyFunctional {
  double constant = 0.0;
  Eigen::VectorXd linear;
  Eigen::MatrixXd quad;

  double operator()(const Eigen::VectorXd& x) const {
    double val = constant;
    if (linear.size() > 0) val += linear.dot(x);
    if (quad.size() > 0) val += x.dot(quad * x);
    return val;
  }
};

/// (1/T) integral of f along the piecewise-linear path, in closed form per
/// segment (f is polynomial of degree <= 2 in the segment parameter).
inline double time_average_exact(const Trajectory& traj, const PolyFunctional& f) {
  if (traj.events.empty()) throw TooFewSamples("time_average: empty trajectory");
  const int d = traj.dim();
  if (f.linear.size() > 0 && f.linear.size() != d) {
    throw UnsupportedFunction("time_average: functional dimension mismatch");
  }
  double total = 0.0;
  double t0 = traj.initial.t;
  Eigen::VectorXd x0 = traj.initial.x;
  Eigen::VectorXd v0 = traj.initial.v;
  for (const auto& e : traj.events) {
    const double dt = e.t - t0;
    if (dt > 0.0) {
      double seg = f.constant * dt;
      if (f.linear.size() > 0) {
        seg += f.linear.dot(x0) * dt + 0.5 * f.linear.dot(v0) * dt * dt;
      }
      if (f.quad.size() > 0) {
        const Eigen::VectorXd qx = f.quad * x0;
        const Eigen::VectorXd qv = f.quad * v0;
        seg += x0.dot(qx) * dt + 0.5 * (x0.dot(qv) + v0.dot(qx)) * dt * dt +
               v0.dot(qv) * dt * dt * dt / 3.0;
      }
      total += seg;
    }
    t0 = e.t;
    x0 = e.x;
    v0 = e.v;
  }
  const double span = traj.total_time() - traj.initial.t;
  if (span <= 0.0) throw TooFewSamples("time_average: zero-length trajectory");
  return total / span;
}

/// Positions at evenly spaced times over [t0, T]; the discretized view of the
/// continuous path used for ESS estimation.
inline std::vector<Eigen::VectorXd> sample_path(const Trajectory& traj, long count) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  const double t0 = traj.initial.t;
  const double span = traj.total_time() - t0;
  double tcur = t0;
  const Eigen::VectorXd* x0 = &traj.initial.x;
  const Eigen::VectorXd* v0 = &traj.initial.v;
  std::size_t next_event = 0;
  for (long k = 0; k < count; ++k) {
    const double t = t0 + span * k / count;
    while (next_event < traj.events.size() && traj.events[next_event].t <= t) {
      tcur = traj.events[next_event].t;
      x0 = &traj.events[next_event].x;
      v0 = &traj.events[next_event].v;
      ++next_event;
    }
    out.push_back(*x0 + (t - tcur) * (*v0));
  }
  return out;
}

inline double time_average_discretized(const Trajectory& traj,
                                       const std::function<double(const Eigen::VectorXd&)>& f,
                                       double delta) {
  const double span = traj.total_time() - traj.initial.t;
  const long count = std::max<long>(1, static_cast<long>(span / delta));
  double sum = 0.0;
  for (const auto& x : sample_path(traj, count)) sum += f(x);
  return sum / static_cast<double>(count);
}

struct EssReport {
  std::string function_name;
  double estimate = 0.0;
  double asymptotic_variance = 0.0;
  double ess = 0.0;
  double epochs = 0.0;
  double ess_per_epoch = 0.0;
};

/// Batch-means ESS: floor(sqrt(n)) batches of equal length (remainder
/// dropped), sigma2 = batch_length * var(batch means),
/// ESS = n * sample_var / sigma2 clipped to [0, n].
inline EssReport ess_batch_means(const std::vector<double>& samples) {
  const long n = static_cast<long>(samples.size());
  if (n < 100) throw TooFewSamples("ess_batch_means needs at least 100 samples");
  const long n_batches = static_cast<long>(std::floor(std::sqrt(static_cast<double>(n))));
  const long batch_len = n / n_batches;
  const long used = n_batches * batch_len;

  double mean = 0.0;
  for (long i = 0; i < used; ++i) mean += samples[i];
  mean /= static_cast<double>(used);

  double sample_var = 0.0;
  for (long i = 0; i < used; ++i) {
    const double r = samples[i] - mean;
    sample_var += r * r;
  }
  sample_var /= static_cast<double>(used - 1);

  double batch_var = 0.0;
  for (long b = 0; b < n_batches; ++b) {
    double bm = 0.0;
    for (long i = b * batch_len; i < (b + 1) * batch_len; ++i) bm += samples[i];
    bm /= static_cast<double>(batch_len);
    batch_var += (bm - mean) * (bm - mean);
  }
  batch_var /= static_cast<double>(n_batches - 1);

  EssReport report;
  report.estimate = mean;
  report.asymptotic_variance = static_cast<double>(batch_len) * batch_var;
  if (report.asymptotic_variance == 0.0) {
    report.ess = 0.0;  // degenerate constant sequence
  } else {
    report.ess = std::clamp(static_cast<double>(used) * sample_var /
                                report.asymptotic_variance,
                            0.0, static_cast<double>(used));
  }
  return report;
}

/// Standard error of the mean implied by the batch-means variance estimate.
inline double batch_means_stderr(const EssReport& report, long n) {
  return std::sqrt(report.asymptotic_variance / static_cast<double>(n));
}

enum class SamplerKind { bps, zigzag };

/// Residual of the probability-flow identity at one point: the rate pushed
/// through the deterministic switch kernel, minus the rate, plus v.gradU.
inline double intensity_condition_residual(SamplerKind kind, const Eigen::VectorXd& grad_u,
                                           const Eigen::VectorXd& v) {
  if (kind == SamplerKind::bps) {
    if (grad_u.squaredNorm() < 1e-300) return 0.0;
    const Eigen::VectorXd bounced = bps_bounce(v, grad_u);
    return bps_rate(grad_u, bounced) - bps_rate(grad_u, v) + v.dot(grad_u);
  }
  double acc = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    acc += std::max(-v(i) * grad_u(i), 0.0) - std::max(v(i) * grad_u(i), 0.0);
  }
  return acc + v.dot(grad_u);
}

/// Max |residual| over random (x, v) pairs; refresh clocks excluded (they
/// cancel in the identity by reversibility of rho).
inline double check_intensity_condition(SamplerKind kind, const TargetModel& model,
                                        int trials, Rng& rng) {
  double worst = 0.0;
  const int d = model.dim();
  for (int k = 0; k < trials; ++k) {
    const Eigen::VectorXd x = 4.0 * rng.gaussian_vector(d);
    Eigen::VectorXd v;
    if (kind == SamplerKind::bps) {
      v = rng.unit_sphere(d);
    } else {
      v.resize(d);
      for (int j = 0; j < d; ++j) v(j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    worst = std::max(worst,
                     std::abs(intensity_condition_residual(kind, model.full_gradient(x), v)));
  }
  return worst;
}

/// Test function f(x, v) with its x-derivative, for the generator check on
/// 1D targets with velocity space {-1, +1}.
struct GeneratorTestFunction {
  std::string name;
  std::function<double(double, double)> f;
  std::function<double(double, double)> dfdx;
};

/// E_{pi x rho}[L f] on a 1D target truncated to (0, x_max), computed by
/// composite Simpson quadrature on the x grid and enumeration of v in
/// {-1,+1}. Both 1D BPS and 1D Zig-Zag have rate max(v U'(x), 0) and a
/// velocity-flip kernel, so one evaluation covers both.
inline double generator_expectation(const std::function<double(double)>& potential,
                                    const std::function<double(double)>& potential_grad,
                                    double x_max, const GeneratorTestFunction& test,
                                    int resolution) {
  const int n = resolution % 2 == 0 ? resolution : resolution + 1;
  const double h = x_max / n;
  double numer = 0.0;
  double denom = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = k * h;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    const double density = std::exp(-potential(x));
    const double du = potential_grad(x);
    double lf = 0.0;
    for (const double v : {-1.0, 1.0}) {
      const double rate = std::max(v * du, 0.0);
      lf += 0.5 * (v * test.dfdx(x, v) + rate * (test.f(x, -v) - test.f(x, v)));
    }
    numer += w * density * lf;
    denom += w * density;
  }
  return numer / denom;
}

/// Max |E[L f]| over a set of test functions.
inline double check_generator_zero(const std::function<double(double)>& potential,
                                   const std::function<double(double)>& potential_grad,
                                   double x_max,
                                   const std::vector<GeneratorTestFunction>& tests,
                                   int resolution) {
  double worst = 0.0;
  for (const auto& test : tests) {
    worst = std::max(worst, std::abs(generator_expectation(potential, potential_grad,
                                                           x_max, test, resolution)));
  }
  return worst;
}

}  // namespace pdmc
