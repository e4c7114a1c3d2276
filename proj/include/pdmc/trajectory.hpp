#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pdmc/errors.hpp"

#include "json.hpp"

namespace pdmc {

/// Instantaneous configuration (t, x, v) of the piecewise deterministic process.
struct State {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd v;
};

/// Constant-velocity drift: (t, x, v) -> (t + dt, x + dt v, v).
inline State advance(const State& s, double dt) {
  return State{s.t + dt, s.x + dt * s.v, s.v};
}

enum class EventKind { switch_clock, reflect, refresh, horizon };

inline std::string kind_label(EventKind kind, int index) {
  switch (kind) {
    case EventKind::switch_clock: return "switch:" + std::to_string(index);
    case EventKind::reflect: return "reflect:" + std::to_string(index);
    case EventKind::refresh: return "refresh";
    case EventKind::horizon: return "horizon";
  }
  return "?";
}

/// One accepted event: time, position, velocity immediately after the event.
/// index is the clock for switches and the face for reflections, -1 otherwise.
struct EventRecord {
  double t;
  Eigen::VectorXd x;
  Eigen::VectorXd v;
  EventKind kind;
  int index = -1;
};

/// Ordered event log, sufficient to reconstruct the piecewise-linear path
/// by interpolation between consecutive records.
struct Trajectory {
  State initial;
  std::vector<EventRecord> events;
  long grad_evals = 0;  // per-datum gradient evaluations, for epoch accounting

  int dim() const { return static_cast<int>(initial.x.size()); }

  double total_time() const {
    return events.empty() ? initial.t : events.back().t;
  }

  /// Position at time t by linear interpolation of the event records.
  Eigen::VectorXd position_at(double t) const {
    double t0 = initial.t;
    const Eigen::VectorXd* x0 = &initial.x;
    const Eigen::VectorXd* v0 = &initial.v;
    for (const auto& e : events) {
      if (t <= e.t) break;
      t0 = e.t;
      x0 = &e.x;
      v0 = &e.v;
    }
    return *x0 + (t - t0) * (*v0);
  }

  void to_csv(std::ostream& os) const {
    const int d = dim();
    os << "t,kind";
    for (int j = 1; j <= d; ++j) os << ",x_" << j;
    for (int j = 1; j <= d; ++j) os << ",v_" << j;
    os << "\n";
    auto row = [&](double t, const std::string& kind, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& v) {
      std::ostringstream line;
      line.precision(17);
      line << t << ',' << kind;
      for (int j = 0; j < d; ++j) line << ',' << x(j);
      for (int j = 0; j < d; ++j) line << ',' << v(j);
      os << line.str() << "\n";
    };
    row(initial.t, "init", initial.x, initial.v);
    for (const auto& e : events) row(e.t, kind_label(e.kind, e.index), e.x, e.v);
  }

  nlohmann::json to_json(std::uint64_t seed, const std::string& sampler_name,
                         const nlohmann::json& domain_spec) const {
    nlohmann::json j;
    j["seed"] = seed;
    j["sampler"] = sampler_name;
    j["domain"] = domain_spec;
    j["grad_evals"] = grad_evals;
    j["initial"] = {{"t", initial.t},
                    {"x", std::vector<double>(initial.x.begin(), initial.x.end())},
                    {"v", std::vector<double>(initial.v.begin(), initial.v.end())}};
    nlohmann::json evs = nlohmann::json::array();
    for (const auto& e : events) {
      evs.push_back({{"t", e.t},
                     {"kind", kind_label(e.kind, e.index)},
                     {"x", std::vector<double>(e.x.begin(), e.x.end())},
                     {"v", std::vector<double>(e.v.begin(), e.v.end())}});
    }
    j["events"] = evs;
    return j;
  }
};

}  // namespace pdmc
