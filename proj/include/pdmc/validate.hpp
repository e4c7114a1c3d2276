#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pdmc/diagnostics.hpp"
#include "pdmc/experiment.hpp"
#include "pdmc/logistic.hpp"
#include "pdmc/subsample.hpp"

namespace pdmc {

struct ValidationItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Brute-force sweep of the subsampling envelope: for random interior x,
/// unit v, u in [0, u_max] and datum index I, the realized subsampled rate at
/// x + u v must never exceed the envelope built at (x, v). Any violation is
/// correctness-critical for thinning.
inline long bound_dominance_violations(const TargetModel& model, const Polytope& domain,
                                       const ControlVariate& cv,
                                       const Eigen::VectorXd& center, int trials,
                                       double u_max, Rng& rng, double* worst_margin = nullptr) {
  long violations = 0;
  double worst = -kInf;
  const int d = model.dim();
  for (int k = 0; k < trials; ++k) {
    Eigen::VectorXd x = center + 0.5 * rng.gaussian_vector(d);
    if (domain.num_constraints() > 0) x = project_polytope(domain, x, 1e-6);
    const Eigen::VectorXd v = rng.unit_sphere(d);
    const double u = u_max * rng.uniform();
    const long index = rng.uniform_int(cv.data_count);
    const AffineRateBound bound = affine_bound_bps(cv, x, v);
    const double rate =
        bps_rate(estimate_grad_at(cv, model, x + u * v, index), v);
    const double margin = rate - bound.value(u);
    worst = std::max(worst, margin);
    if (margin > 0.0) ++violations;
  }
  if (worst_margin) *worst_margin = worst;
  return violations;
}

inline std::vector<GeneratorTestFunction> admissible_generator_tests() {
  // All satisfy f(0, v) = f(0, -v), the specular boundary condition at x = 0.
  return {
      {"x", [](double x, double) { return x; }, [](double, double) { return 1.0; }},
      {"x^2", [](double x, double) { return x * x; },
       [](double x, double) { return 2.0 * x; }},
      {"v*x", [](double x, double v) { return v * x; },
       [](double, double v) { return v; }},
  };
}

inline GeneratorTestFunction odd_in_v_control() {
  // f(0, v) = v violates the boundary condition; the expectation must not vanish.
  return {"v", [](double, double v) { return v; }, [](double, double) { return 0.0; }};
}

/// The invariant suites behind `pdmc validate`: stationarity condition
/// residuals, envelope dominance on the logistic model, and the generator
/// identity on the 1D truncated Gaussian.
inline std::vector<ValidationItem> run_validation(const ExperimentConfig& cfg) {
  std::vector<ValidationItem> items;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  Problem prob = build_problem(cfg);

  {
    ValidationItem item{"intensity_condition_bps"};
    const double res = check_intensity_condition(SamplerKind::bps, *prob.model, 10000, rng);
    item.passed = res <= 1e-12;
    item.detail = "max residual " + std::to_string(res);
    items.push_back(item);
  }
  {
    ValidationItem item{"intensity_condition_zigzag"};
    const double res =
        check_intensity_condition(SamplerKind::zigzag, *prob.model, 10000, rng);
    item.passed = res <= 1e-12;
    item.detail = "max residual " + std::to_string(res);
    items.push_back(item);
  }

  if (const auto* logistic = dynamic_cast<const LogisticModel*>(prob.model.get())) {
    ValidationItem item{"subsampling_bound_dominance"};
    const double lip =
        cfg.lipschitz ? *cfg.lipschitz : logistic_lipschitz_L(logistic->data());
    const ControlVariate cv =
        cfg.reference ? make_control_variate(*prob.model, *cfg.reference, lip)
                      : find_reference(*prob.model, prob.domain, prob.start, lip);
    double worst = 0.0;
    const long violations = bound_dominance_violations(
        *prob.model, prob.domain, cv, cv.x_hat, 10000, 5.0, rng, &worst);
    item.passed = violations == 0;
    std::ostringstream detail;
    detail << violations << " violations, worst margin " << worst;
    item.detail = detail.str();
    items.push_back(item);

    ValidationItem unbiased{"subsampling_unbiasedness"};
    double worst_err = 0.0;
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd x = project_polytope(
          prob.domain, cv.x_hat + 0.3 * rng.gaussian_vector(prob.model->dim()), 1e-6);
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(prob.model->dim());
      for (long i = 0; i < cv.data_count; ++i) {
        avg += estimate_grad_at(cv, *prob.model, x, i);
      }
      avg /= static_cast<double>(cv.data_count);
      worst_err = std::max(worst_err,
                           (avg - prob.model->full_gradient(x)).norm());
    }
    unbiased.passed = worst_err <= 1e-10 * (1.0 + cv.grad_at_hat.norm());
    unbiased.detail = "max |avg estimate - gradient| = " + std::to_string(worst_err);
    items.push_back(unbiased);
  }

  {
    ValidationItem item{"generator_identity_truncated_gaussian"};
    const auto potential = [](double x) { return 0.5 * x * x; };
    const auto grad = [](double x) { return x; };
    const double worst =
        check_generator_zero(potential, grad, 8.0, admissible_generator_tests(), 400);
    const double control =
        std::abs(generator_expectation(potential, grad, 8.0, odd_in_v_control(), 400));
    item.passed = worst <= 1e-4 && control > 1e-2;
    std::ostringstream detail;
    detail << "max |E[Lf]| = " << worst << ", negative control " << control;
    item.detail = detail.str();
    items.push_back(item);
  }

  return items;
}

}  // namespace pdmc
