#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pdmc/baselines.hpp"
#include "pdmc/diagnostics.hpp"
#include "pdmc/errors.hpp"
#include "pdmc/logistic.hpp"
#include "pdmc/model.hpp"
#include "pdmc/polytope.hpp"
#include "pdmc/samplers.hpp"
#include "pdmc/simulate.hpp"
#include "pdmc/subsample.hpp"

#include "json.hpp"

namespace pdmc {

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

/// Parsed experiment description: model, domain, sampler, stop rule, seeds.
struct ExperimentConfig {
  nlohmann::json raw;

  std::string model_type;  // "gaussian" | "logistic"
  Eigen::VectorXd gaussian_mu;
  Eigen::MatrixXd gaussian_sigma;
  long logistic_n = 0;
  int logistic_p = 0;
  double logistic_K = 10.0;
  std::string logistic_data_path;
  std::uint64_t logistic_generation_seed = 0;

  std::string sampler;  // "bps" | "zigzag" | "mala" | "hmc"
  BpsSpec bps;
  double step_size = 0.0;  // 0 means tune on a grid
  int leapfrog_steps = 5;

  bool subsample = false;
  std::optional<Eigen::VectorXd> reference;  // nullopt = "auto"
  std::optional<double> lipschitz;           // nullopt = "auto"

  StopRule stop;
  long runs = 1;
  std::uint64_t seed = 1;
  std::optional<Eigen::VectorXd> start;
  long ess_samples = 10000;

  static ExperimentConfig parse(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return parse(j);
  }
};

inline ExperimentConfig ExperimentConfig::parse(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;

  const auto& model = j.at("model");
  cfg.model_type = model.at("type").get<std::string>();
  if (cfg.model_type == "gaussian") {
    cfg.gaussian_mu = vector_from_json(model.at("mu"));
    cfg.gaussian_sigma = model.contains("sigma")
                             ? matrix_from_json(model.at("sigma"))
                             : Eigen::MatrixXd(Eigen::MatrixXd::Identity(
                                   cfg.gaussian_mu.size(), cfg.gaussian_mu.size()));
  } else if (cfg.model_type == "logistic") {
    cfg.logistic_n = model.value("n", 0L);
    cfg.logistic_p = model.value("p", 0);
    cfg.logistic_K = model.value("K", 10.0);
    cfg.logistic_data_path = model.value("data", std::string());
    cfg.logistic_generation_seed = model.value("generation_seed", std::uint64_t{12345});
    if (cfg.logistic_data_path.empty() && (cfg.logistic_n < 1 || cfg.logistic_p < 1)) {
      throw ConfigError("logistic model needs n >= 1 and p >= 1 (or a data path)");
    }
  } else {
    throw ConfigError("unknown model type: " + cfg.model_type);
  }

  const auto& sampler = j.at("sampler");
  cfg.sampler = sampler.at("sampler").get<std::string>();
  cfg.bps.refresh_rate = sampler.value("refresh_rate", 1.0);
  const std::string law = sampler.value("velocity_law", std::string("uniform_sphere"));
  if (law == "uniform_sphere") {
    cfg.bps.velocity_law = VelocityLaw::uniform_sphere;
  } else if (law == "gaussian_isotropic") {
    cfg.bps.velocity_law = VelocityLaw::gaussian_isotropic;
  } else {
    throw ConfigError("unknown velocity law: " + law);
  }
  if (sampler.contains("preconditioner")) {
    cfg.bps.preconditioner = matrix_from_json(sampler.at("preconditioner"));
  }
  cfg.step_size = sampler.value("step_size", 0.0);
  cfg.leapfrog_steps = sampler.value("leapfrog_steps", 5);

  cfg.subsample = j.value("subsample", false);
  if (j.contains("reference") && j.at("reference").is_array()) {
    cfg.reference = vector_from_json(j.at("reference"));
  }
  if (j.contains("L") && j.at("L").is_number()) {
    cfg.lipschitz = j.at("L").get<double>();
  }

  const auto& stop = j.at("stop");
  if (stop.contains("max_time")) {
    cfg.stop = StopRule::max_time(stop.at("max_time").get<double>());
  } else if (stop.contains("max_events")) {
    cfg.stop = StopRule::max_events(stop.at("max_events").get<long>());
  } else {
    throw ConfigError("stop rule must set max_time or max_events");
  }

  cfg.runs = j.value("runs", 1L);
  cfg.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("start")) cfg.start = vector_from_json(j.at("start"));
  cfg.ess_samples = j.value("ess_samples", 10000L);
  return cfg;
}

/// Model, domain and starting point assembled from a config.
struct Problem {
  std::shared_ptr<TargetModel> model;
  Polytope domain{Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)};
  Eigen::VectorXd start;
  std::optional<LogisticData> logistic_data;
};

inline Polytope domain_from_config(const nlohmann::json& j, int dim, double K) {
  if (!j.contains("domain")) return Polytope::unrestricted(dim);
  const auto& d = j.at("domain");
  if (d.contains("constraints")) return Polytope::from_json(d);
  const std::string type = d.at("type").get<std::string>();
  if (type == "unrestricted") return Polytope::unrestricted(dim);
  if (type == "nonneg_simplex") return Polytope::nonneg_simplex(dim, d.value("K", K));
  if (type == "box") {
    return Polytope::box(vector_from_json(d.at("lo")), vector_from_json(d.at("hi")));
  }
  throw ConfigError("unknown domain type: " + type);
}

inline Problem build_problem(const ExperimentConfig& cfg) {
  Problem prob;
  if (cfg.model_type == "gaussian") {
    prob.model = std::make_shared<GaussianTarget>(cfg.gaussian_mu, cfg.gaussian_sigma);
  } else {
    LogisticData data;
    if (!cfg.logistic_data_path.empty()) {
      std::ifstream in(cfg.logistic_data_path);
      if (!in) throw ConfigError("cannot open data file: " + cfg.logistic_data_path);
      data = LogisticData::from_csv(in);
    } else {
      Rng rng(cfg.logistic_generation_seed);
      data = generate_logistic_data(cfg.logistic_n, cfg.logistic_p, cfg.logistic_K, rng);
    }
    if (data.n() < 1) throw ConfigError("logistic model has zero data");
    prob.logistic_data = data;
    prob.model = std::make_shared<LogisticModel>(std::move(data));
  }

  const int d = prob.model->dim();
  prob.domain = domain_from_config(cfg.raw, d, cfg.logistic_K);

  if (cfg.start) {
    prob.start = *cfg.start;
  } else if (prob.domain.num_constraints() == 0) {
    prob.start = cfg.model_type == "gaussian" ? cfg.gaussian_mu
                                              : Eigen::VectorXd::Zero(d);
  } else {
    prob.start = project_polytope(prob.domain, Eigen::VectorXd::Zero(d), 1e-2);
  }
  if (!prob.domain.strictly_inside(prob.start)) {
    throw ConfigError("start point is not strictly inside the domain");
  }
  return prob;
}

/// Output of one chain: either a PDMP trajectory or a discrete sample list.
struct RunResult {
  long run_index = 0;
  std::uint64_t seed = 0;
  std::optional<Trajectory> trajectory;
  std::vector<Eigen::VectorXd> samples;  // discretized path or MH states
  double epochs = 0.0;
  EssReport f1, f2;
};

inline std::shared_ptr<Dynamics> build_dynamics(const ExperimentConfig& cfg,
                                                const Problem& prob) {
  std::shared_ptr<const TargetModel> model = prob.model;
  if (cfg.sampler == "zigzag") {
    if (cfg.subsample) throw ConfigError("subsampling is wired for BPS only");
    return std::make_shared<ZigZagDynamics>(model);
  }
  if (cfg.sampler != "bps") throw ConfigError("not a PDMP sampler: " + cfg.sampler);
  if (!cfg.subsample) return std::make_shared<BpsDynamics>(model, cfg.bps);

  double lip;
  if (cfg.lipschitz) {
    lip = *cfg.lipschitz;
  } else {
    const auto* logistic = dynamic_cast<const LogisticModel*>(model.get());
    if (!logistic) throw ConfigError("L: \"auto\" is only available for the logistic model");
    lip = logistic_lipschitz_L(logistic->data());
  }
  ControlVariate cv = cfg.reference
                          ? make_control_variate(*model, *cfg.reference, lip)
                          : find_reference(*model, prob.domain, prob.start, lip);
  return std::make_shared<SubsampledBpsDynamics>(model, std::move(cv), cfg.bps);
}

/// Executes one chain with seed base_seed + run_index and computes the
/// f1 = (1/p) sum_j x_j and f2 = log pi diagnostics.
inline RunResult run_single(const ExperimentConfig& cfg, const Problem& prob,
                            long run_index) {
  RunResult result;
  result.run_index = run_index;
  result.seed = cfg.seed + static_cast<std::uint64_t>(run_index);
  Rng rng(result.seed);

  const int d = prob.model->dim();
  const auto f1 = [d](const Eigen::VectorXd& x) { return x.sum() / d; };
  const auto f2 = [&](const Eigen::VectorXd& x) { return -prob.model->potential(x); };

  if (cfg.sampler == "bps" || cfg.sampler == "zigzag") {
    Problem local = prob;
    Eigen::MatrixXd back;  // x = C y when preconditioned
    if (cfg.sampler == "bps" && cfg.bps.preconditioner) {
      Preconditioned pre =
          precondition(*cfg.bps.preconditioner, prob.model, prob.domain);
      back = pre.transform;
      local.model = pre.model;
      local.domain = pre.domain;
      local.start = pre.transform.triangularView<Eigen::Lower>().solve(prob.start);
    }
    auto dynamics = build_dynamics(cfg, local);
    State initial{0.0, local.start, dynamics->initial_velocity(d, rng)};
    Trajectory traj = simulate(initial, *dynamics, local.domain, cfg.stop, rng);
    result.epochs = static_cast<double>(traj.grad_evals) /
                    static_cast<double>(prob.model->data_count());
    result.samples = sample_path(traj, cfg.ess_samples);
    if (back.size() > 0) {
      for (auto& s : result.samples) s = back * s;
      // Map the stored trajectory back to x-space as well.
      traj.initial.x = back * traj.initial.x;
      traj.initial.v = back * traj.initial.v;
      for (auto& e : traj.events) {
        e.x = back * e.x;
        e.v = back * e.v;
      }
    }
    result.trajectory = std::move(traj);
  } else if (cfg.sampler == "mala" || cfg.sampler == "hmc") {
    const bool is_mala = cfg.sampler == "mala";
    long evals = 0;
    double h = cfg.step_size;
    if (h <= 0.0) {
      const auto one_step = [&](MhChainState& s, double hh, Rng& r, long& e) {
        if (is_mala) {
          mala_step(s, *prob.model, prob.domain, hh, r, e);
        } else {
          hmc_step(s, *prob.model, prob.domain, hh, cfg.leapfrog_steps, r, e);
        }
      };
      h = tune_step_size(*prob.model, prob.domain, prob.start, f1, 1.0, 2000,
                         cfg.seed * 7919u, one_step);
    }
    const long steps = cfg.stop.event_cap > 0 ? cfg.stop.event_cap
                                              : static_cast<long>(cfg.stop.time_horizon);
    MhChainState chain = mh_init(*prob.model, prob.start, evals);
    result.samples.reserve(steps);
    for (long s = 0; s < steps; ++s) {
      if (is_mala) {
        mala_step(chain, *prob.model, prob.domain, h, rng, evals);
      } else {
        hmc_step(chain, *prob.model, prob.domain, h, cfg.leapfrog_steps, rng, evals);
      }
      result.samples.push_back(chain.x);
    }
    result.epochs = static_cast<double>(evals) /
                    static_cast<double>(prob.model->data_count());
  } else {
    throw ConfigError("unknown sampler: " + cfg.sampler);
  }

  std::vector<double> f1_samples, f2_samples;
  f1_samples.reserve(result.samples.size());
  f2_samples.reserve(result.samples.size());
  for (const auto& x : result.samples) {
    f1_samples.push_back(f1(x));
    f2_samples.push_back(f2(x));
  }
  result.f1 = ess_batch_means(f1_samples);
  result.f1.function_name = "f1";
  result.f2 = ess_batch_means(f2_samples);
  result.f2.function_name = "f2";
  for (EssReport* r : {&result.f1, &result.f2}) {
    r->epochs = result.epochs;
    r->ess_per_epoch = result.epochs > 0.0 ? r->ess / result.epochs : 0.0;
  }
  return result;
}

inline int worker_count(long runs) {
  long cap = static_cast<long>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PDMC_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 0) cap = parsed;
  }
  return static_cast<int>(std::min<long>(std::max<long>(cap, 1), runs));
}

/// All chains of an experiment; independent tasks with per-chain RNG streams,
/// results ordered by run index regardless of worker count.
inline std::vector<RunResult> run_all(const ExperimentConfig& cfg, const Problem& prob) {
  std::vector<RunResult> results(cfg.runs);
  const int workers = worker_count(cfg.runs);
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (long r = next.fetch_add(1); r < cfg.runs; r = next.fetch_add(1)) {
        results[r] = run_single(cfg, prob, r);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

inline void write_diagnostics_csv(std::ostream& os, const std::string& sampler,
                                  const std::vector<RunResult>& results) {
  os << "run_id,sampler,function,estimate,ess,epochs,ess_per_epoch\n";
  std::ostringstream line;
  line.precision(17);
  for (const auto& r : results) {
    for (const EssReport* rep : {&r.f1, &r.f2}) {
      line.str("");
      line << r.run_index << ',' << sampler << ',' << rep->function_name << ','
           << rep->estimate << ',' << rep->ess << ',' << rep->epochs << ','
           << rep->ess_per_epoch;
      os << line.str() << "\n";
    }
  }
}

}  // namespace pdmc
