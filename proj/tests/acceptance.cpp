// Acceptance suite: one line of output per criterion, nonzero exit if any
// hard criterion fails. Criterion 9c is reported but does not fail the build
// (qualitative ordering with no published effect size).

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pdmc/experiment.hpp"
#include "pdmc/validate.hpp"
#include "test_util.hpp"

using namespace pdmc;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(const std::string& label, bool passed, const std::string& detail,
            bool soft = false) {
  std::string verdict = passed ? "[PASS]" : (soft ? "[WARN]" : "[FAIL]");
  if (!passed && !soft) ++g_failures;
  std::cout << verdict << " " << label << " — " << detail << std::endl;
}

Polytope half_line_positive() {
  Eigen::MatrixXd g(1, 1);
  g << -1.0;
  return Polytope(g, VectorXd::Zero(1));
}

LogisticModel experiment_model() {
  Rng rng(20240817);
  return LogisticModel(generate_logistic_data(1000, 5, 10.0, rng));
}

// 1. Affine arrival sampling vs analytic CDF.
void criterion_1() {
  const double a = 1.0, b = 2.0;
  const int n = 10000;
  Rng rng(11);
  std::vector<double> draws;
  draws.reserve(n);
  for (int k = 0; k < n; ++k) {
    draws.push_back(first_arrival_affine(AffineRateBound{a, b}, rng));
  }
  const double d = testutil::ks_one_sample(
      draws, [&](double t) { return 1.0 - std::exp(-(a * t + 0.5 * b * t * t)); });
  const double crit = testutil::ks_critical_1pct(n);
  std::ostringstream detail;
  detail << "KS " << d << " vs critical " << crit;
  report("1. affine arrival exactness", d < crit, detail.str());
}

// 2. Thinning vs direct inversion.
void criterion_2() {
  const auto rate = [](double u) { return 0.5 + 0.3 * u; };
  const int n = 10000;
  Rng rng_thin(22), rng_direct(23);
  std::vector<double> thinned, direct;
  for (int k = 0; k < n; ++k) {
    double u = 0.0;
    for (;;) {
      u += invert_affine_arrival(1.0 + u, 1.0, rng_thin.exponential());
      if (thinning_accept(rate(u), 1.0 + u, rng_thin)) break;
    }
    thinned.push_back(u);
    direct.push_back(first_arrival_affine(AffineRateBound{0.5, 0.3}, rng_direct));
  }
  const double d = testutil::ks_two_sample(thinned, direct);
  const double crit = testutil::ks_two_sample_critical_1pct(n, n);
  std::ostringstream detail;
  detail << "two-sample KS " << d << " vs critical " << crit;
  report("2. thinning equivalence", d < crit, detail.str());
}

// 3. Intensity condition residuals.
void criterion_3() {
  const LogisticModel model = experiment_model();
  Rng rng(33);
  const double bps = check_intensity_condition(SamplerKind::bps, model, 10000, rng);
  const double zz = check_intensity_condition(SamplerKind::zigzag, model, 10000, rng);
  std::ostringstream detail;
  detail << "max residual bps " << bps << ", zigzag " << zz;
  report("3. intensity condition", bps <= 1e-12 && zz <= 1e-12, detail.str());
}

// 4. Specular reflection kernel properties.
void criterion_4() {
  Rng rng(44);
  double worst_flux = 0.0, worst_norm = 0.0, worst_inv = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const VectorXd v = rng.gaussian_vector(5);
    const VectorXd n = rng.unit_sphere(5);
    const VectorXd r = specular_reflect(v, n);
    worst_flux = std::max(worst_flux, std::abs(n.dot(r) + n.dot(v)));
    worst_norm = std::max(worst_norm, std::abs(r.norm() - v.norm()));
    worst_inv = std::max(worst_inv, (specular_reflect(r, n) - v).norm());
  }
  std::ostringstream detail;
  detail << "max |n.r + n.v| " << worst_flux << ", norm drift " << worst_norm
         << ", involution " << worst_inv;
  report("4. boundary kernel condition",
         worst_flux <= 1e-14 * 10.0 && worst_norm <= 1e-14 * 10.0 &&
             worst_inv <= 1e-13,
         detail.str());
}

// 5. Stationarity of BPS and Zig-Zag on the 1D truncated Gaussian.
void criterion_5() {
  auto model = std::make_shared<GaussianTarget>(GaussianTarget::standard(1));
  const Polytope domain = half_line_positive();
  const double target = std::sqrt(2.0 / M_PI);
  const double horizon = 100000.0;

  const auto run = [&](Dynamics& dyn, std::uint64_t seed, const std::string& name) {
    Rng rng(seed);
    const Trajectory traj =
        simulate(State{0.0, VectorXd::Constant(1, 0.5), dyn.initial_velocity(1, rng)},
                 dyn, domain, StopRule::max_time(horizon), rng);
    std::vector<double> xs;
    for (const auto& x : sample_path(traj, 100000)) xs.push_back(x(0));
    const EssReport rep = ess_batch_means(xs);
    const double se = batch_means_stderr(rep, static_cast<long>(xs.size()));
    std::ostringstream detail;
    detail << name << " mean " << rep.estimate << " vs " << target << ", 3se "
           << 3.0 * se;
    report("5. stationarity (" + name + ")",
           std::abs(rep.estimate - target) <= 3.0 * se, detail.str());
  };

  BpsDynamics bps(model, BpsSpec{});
  run(bps, 55, "bps");
  ZigZagDynamics zz(model);
  run(zz, 56, "zigzag");
}

// 6. Generator identity on the truncated Gaussian.
void criterion_6() {
  const auto potential = [](double x) { return 0.5 * x * x; };
  const auto grad = [](double x) { return x; };
  const double worst =
      check_generator_zero(potential, grad, 8.0, admissible_generator_tests(), 400);
  const double control =
      std::abs(generator_expectation(potential, grad, 8.0, odd_in_v_control(), 400));
  std::ostringstream detail;
  detail << "max |E[Lf]| " << worst << " (<= 1e-4), control " << control
         << " (> 1e-2)";
  report("6. generator identity", worst <= 1e-4 && control > 1e-2, detail.str());
}

// 7. Subsampling estimator unbiasedness on the experiment model.
void criterion_7() {
  const LogisticModel model = experiment_model();
  const Polytope domain = Polytope::nonneg_simplex(5, 10.0);
  const double lip = logistic_lipschitz_L(model.data());
  const ControlVariate cv =
      find_reference(model, domain, VectorXd::Constant(5, 0.5), lip);
  Rng rng(77);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const VectorXd x =
        project_polytope(domain, cv.x_hat + 0.5 * rng.gaussian_vector(5), 1e-6);
    VectorXd avg = VectorXd::Zero(5);
    for (long i = 0; i < cv.data_count; ++i) avg += estimate_grad_at(cv, model, x, i);
    avg /= static_cast<double>(cv.data_count);
    const VectorXd full = model.full_gradient(x);
    worst = std::max(worst, (avg - full).norm() / (1.0 + full.norm()));
  }
  std::ostringstream detail;
  detail << "max relative deviation " << worst << " (<= 1e-10)";
  report("7. subsampling unbiasedness", worst <= 1e-10, detail.str());
}

// 8. Envelope dominance sweep.
void criterion_8() {
  const LogisticModel model = experiment_model();
  const Polytope domain = Polytope::nonneg_simplex(5, 10.0);
  const double lip = logistic_lipschitz_L(model.data());
  const ControlVariate cv =
      find_reference(model, domain, VectorXd::Constant(5, 0.5), lip);
  Rng rng(88);
  double worst = 0.0;
  const long violations =
      bound_dominance_violations(model, domain, cv, cv.x_hat, 10000, 5.0, rng, &worst);
  std::ostringstream detail;
  detail << violations << " violations over 10^4 draws, worst margin " << worst;
  report("8. bound validity", violations == 0, detail.str());
}

// 9. Scaled restricted-logistic comparison.
struct SamplerSummary {
  std::string name;
  double mean = 0.0;      // pooled post-burn-in f1 mean
  double var = 0.0;       // variance of that pooled mean
  double median_ess_per_epoch = 0.0;
  bool all_inside = true;
};

SamplerSummary summarize(const std::string& name, const ExperimentConfig& cfg,
                         const Problem& prob) {
  const auto results = run_all(cfg, prob);
  SamplerSummary s;
  s.name = name;
  const int d = prob.model->dim();
  std::vector<double> run_means, run_vars, ess_rates;
  for (const auto& r : results) {
    for (const auto& x : r.samples) {
      if (!prob.domain.contains(x)) s.all_inside = false;
    }
    // Drop the first 10% as burn-in before comparing posterior means.
    const std::size_t skip = r.samples.size() / 10;
    std::vector<double> f1;
    f1.reserve(r.samples.size() - skip);
    for (std::size_t k = skip; k < r.samples.size(); ++k) {
      f1.push_back(r.samples[k].sum() / d);
    }
    const EssReport rep = ess_batch_means(f1);
    run_means.push_back(rep.estimate);
    const double se = batch_means_stderr(rep, static_cast<long>(f1.size()));
    run_vars.push_back(se * se);
    ess_rates.push_back(r.f1.ess_per_epoch);
  }
  const double R = static_cast<double>(run_means.size());
  s.mean = testutil::mean(run_means);
  for (double v : run_vars) s.var += v / (R * R);
  std::sort(ess_rates.begin(), ess_rates.end());
  s.median_ess_per_epoch = 0.5 * (ess_rates[ess_rates.size() / 2] +
                                  ess_rates[(ess_rates.size() - 1) / 2]);
  return s;
}

void criterion_9() {
  json base = {
      {"model", {{"type", "logistic"}, {"n", 1000}, {"p", 5}, {"K", 10.0},
                 {"generation_seed", 20240817}}},
      {"domain", {{"type", "nonneg_simplex"}, {"K", 10.0}}},
      {"runs", 10},
      {"ess_samples", 10000},
  };

  json bps = base;
  bps["sampler"] = {{"sampler", "bps"}, {"refresh_rate", 1.0}};
  bps["subsample"] = true;
  bps["stop"] = {{"max_time", 2000.0}};
  bps["seed"] = 101;

  json mala = base;
  mala["sampler"] = {{"sampler", "mala"}};
  mala["stop"] = {{"max_events", 5000}};
  mala["seed"] = 202;

  json hmc = base;
  hmc["sampler"] = {{"sampler", "hmc"}, {"leapfrog_steps", 5}};
  hmc["stop"] = {{"max_events", 2000}};
  hmc["seed"] = 303;

  std::vector<SamplerSummary> summaries;
  for (const auto& [name, j] :
       std::vector<std::pair<std::string, json>>{{"bps", bps}, {"mala", mala},
                                                 {"hmc", hmc}}) {
    const ExperimentConfig cfg = ExperimentConfig::parse(j);
    const Problem prob = build_problem(cfg);
    summaries.push_back(summarize(name, cfg, prob));
  }

  bool agree = true;
  std::ostringstream agree_detail;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    for (std::size_t j = i + 1; j < summaries.size(); ++j) {
      const double gap = std::abs(summaries[i].mean - summaries[j].mean);
      const double limit = 3.0 * std::sqrt(summaries[i].var + summaries[j].var);
      agree = agree && gap <= limit;
      agree_detail << summaries[i].name << "/" << summaries[j].name << " gap "
                   << gap << " vs " << limit << "; ";
    }
  }
  report("9a. posterior mean agreement", agree, agree_detail.str());

  bool inside = true;
  for (const auto& s : summaries) inside = inside && s.all_inside;
  report("9b. constraint satisfaction", inside,
         inside ? "no emitted sample outside the polytope"
                : "a sample violated the constraints");

  std::ostringstream ordering;
  for (const auto& s : summaries) {
    ordering << s.name << " median ESS/epoch " << s.median_ess_per_epoch << "; ";
  }
  const bool bps_wins =
      summaries[0].median_ess_per_epoch > summaries[1].median_ess_per_epoch &&
      summaries[0].median_ess_per_epoch > summaries[2].median_ess_per_epoch;
  report("9c. efficiency ordering (soft check)", bps_wins, ordering.str(),
         /*soft=*/true);
}

// 10. Logistic per-datum gradient vs central finite differences.
void criterion_10() {
  const LogisticModel model = experiment_model();
  const LogisticData& data = model.data();
  Rng rng(110);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const long i = rng.uniform_int(data.n());
    const VectorXd x = rng.gaussian_vector(5);
    const VectorXd g = logistic_per_datum_gradient(data, i, x);
    VectorXd fd(5);
    for (int j = 0; j < 5; ++j) {
      VectorXd lo = x, hi = x;
      lo(j) -= h;
      hi(j) += h;
      const auto term = [&](const VectorXd& p) {
        return log1p_exp_neg(data.labels(i) * p.dot(data.covariates.col(i)));
      };
      fd(j) = (term(hi) - term(lo)) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).norm() / (1.0 + g.norm()));
  }
  std::ostringstream detail;
  detail << "max relative error " << worst << " (<= 1e-6)";
  report("10. gradient vs finite differences", worst <= 1e-6, detail.str());
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
  } catch (const std::exception& e) {
    std::cout << "[FAIL] acceptance suite aborted — " << e.what() << std::endl;
    return 1;
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  std::cout << (g_failures == 0 ? "ALL HARD CRITERIA PASSED" : "FAILURES PRESENT")
            << " (" << elapsed << " s)" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
