#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pdmc/baselines.hpp"
#include "test_util.hpp"

using namespace pdmc;
using Eigen::VectorXd;

namespace {

VectorXd vec1(double a) { return VectorXd::Constant(1, a); }

Polytope half_line_positive() {
  Eigen::MatrixXd g(1, 1);
  g << -1.0;
  return Polytope(g, VectorXd::Zero(1));
}

struct MomentCheck {
  double mean;
  double mean_se;
  double second;
  double second_se;
};

template <typename StepFn>
MomentCheck run_chain(const TargetModel& model, const Polytope& domain,
                      const VectorXd& start, long steps, std::uint64_t seed,
                      StepFn&& one_step) {
  Rng rng(seed);
  long evals = 0;
  MhChainState chain = mh_init(model, start, evals);
  std::vector<double> xs, x2s;
  xs.reserve(steps);
  for (long s = 0; s < steps; ++s) {
    one_step(chain, rng, evals);
    REQUIRE(domain.contains(chain.x));
    xs.push_back(chain.x(0));
    x2s.push_back(chain.x(0) * chain.x(0));
  }
  const EssReport rx = ess_batch_means(xs);
  const EssReport rx2 = ess_batch_means(x2s);
  return {rx.estimate, batch_means_stderr(rx, steps), rx2.estimate,
          batch_means_stderr(rx2, steps)};
}

}  // namespace

TEST_CASE("MALA recovers the moments of a 1D Gaussian") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = Polytope::unrestricted(1);
  const MomentCheck m = run_chain(
      model, domain, vec1(0.1), 40000, 1001,
      [&](MhChainState& c, Rng& rng, long& evals) {
        mala_step(c, model, domain, 1.0, rng, evals);
      });
  CHECK(std::abs(m.mean - 0.0) <= 4.0 * m.mean_se);
  CHECK(std::abs(m.second - 1.0) <= 4.0 * m.second_se);
}

TEST_CASE("MALA on the positive half line matches the truncated Gaussian") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = half_line_positive();
  const MomentCheck m = run_chain(
      model, domain, vec1(0.5), 60000, 2002,
      [&](MhChainState& c, Rng& rng, long& evals) {
        mala_step(c, model, domain, 0.8, rng, evals);
      });
  const double mean_exact = std::sqrt(2.0 / M_PI);
  CHECK(std::abs(m.mean - mean_exact) <= 4.0 * m.mean_se);
  CHECK(std::abs(m.second - 1.0) <= 4.0 * m.second_se);
}

TEST_CASE("HMC recovers the moments of the truncated Gaussian") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = half_line_positive();
  const MomentCheck m = run_chain(
      model, domain, vec1(0.5), 30000, 3003,
      [&](MhChainState& c, Rng& rng, long& evals) {
        hmc_step(c, model, domain, 0.25, 5, rng, evals);
      });
  const double mean_exact = std::sqrt(2.0 / M_PI);
  CHECK(std::abs(m.mean - mean_exact) <= 4.0 * m.mean_se);
  CHECK(std::abs(m.second - 1.0) <= 4.0 * m.second_se);
}

TEST_CASE("HMC acceptance approaches one as the step size shrinks") {
  const GaussianTarget model = GaussianTarget::standard(2);
  const Polytope domain = Polytope::unrestricted(2);
  Rng rng(4004);
  long evals = 0;
  MhChainState chain = mh_init(model, VectorXd::Zero(2), evals);
  for (int s = 0; s < 2000; ++s) hmc_step(chain, model, domain, 0.01, 5, rng, evals);
  const double accept =
      static_cast<double>(chain.accepted_count) / chain.proposed_count;
  CHECK(accept > 0.999);
}

TEST_CASE("proposals leaving the domain are rejected outright") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = Polytope::box(vec1(0.0), vec1(1.0));
  Rng rng(5005);
  long evals = 0;

  // With h = 1000 the drift term -h^2 gradU(0.5)/2 = -2.5e5 dwarfs the noise,
  // so every proposal lands far outside the unit box.
  MhChainState mala_chain = mh_init(model, vec1(0.5), evals);
  const long before = evals;
  for (int s = 0; s < 500; ++s) {
    mala_step(mala_chain, model, domain, 1000.0, rng, evals);
    CHECK(domain.contains(mala_chain.x));
  }
  CHECK(mala_chain.accepted_count == 0);
  // Outright rejections never touch the data.
  CHECK(evals == before);

  MhChainState hmc_chain = mh_init(model, vec1(0.5), evals);
  const long before_hmc = evals;
  for (int s = 0; s < 500; ++s) {
    hmc_step(hmc_chain, model, domain, 1000.0, 3, rng, evals);
    CHECK(domain.contains(hmc_chain.x));
  }
  CHECK(hmc_chain.accepted_count == 0);
  CHECK(evals == before_hmc);
}

TEST_CASE("datum evaluation accounting") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = Polytope::unrestricted(1);
  Rng rng(6006);
  long evals = 0;
  MhChainState chain = mh_init(model, vec1(0.0), evals);
  CHECK(evals == 1);  // initialization evaluates the model once

  evals = 0;
  mala_step(chain, model, domain, 0.5, rng, evals);
  CHECK(evals == 1);  // unrestricted: every proposal is evaluated

  evals = 0;
  hmc_step(chain, model, domain, 0.1, 5, rng, evals);
  CHECK(evals == 6);  // 5 leapfrog gradients + final potential
}

TEST_CASE("tune_step_size picks from the grid and is deterministic") {
  const GaussianTarget model = GaussianTarget::standard(1);
  const Polytope domain = Polytope::unrestricted(1);
  const auto f = [](const VectorXd& x) { return x(0); };
  const auto step = [&](MhChainState& c, double h, Rng& rng, long& evals) {
    mala_step(c, model, domain, h, rng, evals);
  };
  const double h1 = tune_step_size(model, domain, vec1(0.0), f, 10.0, 2000, 7007, step);
  const double h2 = tune_step_size(model, domain, vec1(0.0), f, 10.0, 2000, 7007, step);
  CHECK(h1 == h2);

  bool on_grid = false;
  for (int k = 0; k < 20; ++k) {
    if (std::abs(h1 - 10.0 * std::pow(10.0, -k / 10.0)) <= 1e-12 * h1) on_grid = true;
  }
  CHECK(on_grid);
  // A sane MALA step for the standard Gaussian is O(1), not the extremes.
  CHECK(h1 < 10.0);
  CHECK(h1 > 0.05);
}
