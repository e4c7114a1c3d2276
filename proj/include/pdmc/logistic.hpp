#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdmc/errors.hpp"
#include "pdmc/model.hpp"
#include "pdmc/rng.hpp"

#include "json.hpp"

namespace pdmc {

/// f(z) = 1 / (1 + exp(-z)), exponentiating only negative arguments.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// -log f(z) = log(1 + exp(-z)), same stability convention.
inline double log1p_exp_neg(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

/// Binary regression data: labels in {-1,+1}, covariates as a p x n matrix.
/// The generating parameter is kept for reporting only.
struct LogisticData {
  Eigen::VectorXd labels;      // n entries, each +-1
  Eigen::MatrixXd covariates;  // p x n, column i is xi_i
  Eigen::VectorXd truth;       // x*, empty when data was loaded

  long n() const { return labels.size(); }
  int p() const { return static_cast<int>(covariates.rows()); }

  void validate() const {
    if (covariates.cols() != labels.size()) {
      throw ConfigError("logistic data: label/covariate count mismatch");
    }
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels(i) != 1.0 && labels(i) != -1.0) {
        throw ConfigError("logistic data: label must be +-1");
      }
    }
    if (!covariates.allFinite()) throw ConfigError("logistic data: non-finite covariate");
  }

  // CSV layout: label, covariate_1, ..., covariate_p per row.
  void to_csv(std::ostream& os) const {
    std::ostringstream line;
    line.precision(17);
    for (Eigen::Index i = 0; i < n(); ++i) {
      line.str("");
      line << labels(i);
      for (int j = 0; j < p(); ++j) line << ',' << covariates(j, i);
      os << line.str() << "\n";
    }
  }

  static LogisticData from_csv(std::istream& is) {
    std::vector<double> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
      if (vals.size() < 2) throw ConfigError("logistic csv: row with fewer than 2 columns");
      labels.push_back(vals[0]);
      rows.emplace_back(vals.begin() + 1, vals.end());
    }
    if (rows.empty()) throw ConfigError("logistic csv: no data rows");
    LogisticData data;
    const long n = static_cast<long>(rows.size());
    const int p = static_cast<int>(rows[0].size());
    data.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), n);
    data.covariates.resize(p, n);
    for (long i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != p) {
        throw ConfigError("logistic csv: ragged rows");
      }
      data.covariates.col(i) = Eigen::Map<Eigen::VectorXd>(rows[i].data(), p);
    }
    data.validate();
    return data;
  }

  nlohmann::json sidecar(std::uint64_t seed) const {
    nlohmann::json j;
    j["generation_seed"] = seed;
    j["n"] = n();
    j["p"] = p();
    if (truth.size() > 0) j["truth"] = std::vector<double>(truth.begin(), truth.end());
    return j;
  }
};

/// Synthetic data: x* has i.i.d. uniform components rescaled into
/// {x >= 0, sum <= K}; covariate entries are i.i.d. uniform on [-1, 1];
/// labels are +1 with probability f(x*' xi_i).
inline LogisticData generate_logistic_data(long n, int p, double K, Rng& rng) {
  LogisticData data;
  data.truth.resize(p);
  for (int j = 0; j < p; ++j) data.truth(j) = rng.uniform();
  const double total = data.truth.sum();
  if (total > K) data.truth *= K / total;

  data.covariates.resize(p, n);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.covariates(j, i) = 2.0 * rng.uniform() - 1.0;
  }
  data.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    const double prob = sigmoid(data.truth.dot(data.covariates.col(i)));
    data.labels(i) = rng.uniform() < prob ? 1.0 : -1.0;
  }
  return data;
}

/// L = (1/4) max_i ||xi_i||^2, the uniform per-datum Hessian eigenvalue bound.
inline double logistic_lipschitz_L(const LogisticData& data) {
  double max_sq = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    max_sq = std::max(max_sq, data.covariates.col(i).squaredNorm());
  }
  return 0.25 * max_sq;
}

/// Gradient of the i-th negative-log term: -f(-y_i x' xi_i) y_i xi_i.
inline Eigen::VectorXd logistic_per_datum_gradient(const LogisticData& data, long i,
                                                   const Eigen::VectorXd& x) {
  const double z = data.labels(i) * x.dot(data.covariates.col(i));
  return -sigmoid(-z) * data.labels(i) * data.covariates.col(i);
}

/// Flat-prior posterior of the logistic model on the restricted domain:
/// U(x) = sum_i log(1 + exp(-y_i x' xi_i)).
class LogisticModel : public TargetModel {
 public:
  explicit LogisticModel(LogisticData data) : data_(std::move(data)) {
    data_.validate();
    hessian_bound_full_ = 0.0;
    for (Eigen::Index i = 0; i < data_.n(); ++i) {
      hessian_bound_full_ += 0.25 * data_.covariates.col(i).squaredNorm();
    }
  }

  const LogisticData& data() const { return data_; }

  int dim() const override { return data_.p(); }
  long data_count() const override { return data_.n(); }

  double potential(const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd z =
        data_.labels.cwiseProduct(data_.covariates.transpose() * x);
    double u = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) u += log1p_exp_neg(z(i));
    return u;
  }

  Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd z =
        data_.labels.cwiseProduct(data_.covariates.transpose() * x);
    Eigen::VectorXd w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) w(i) = -sigmoid(-z(i)) * data_.labels(i);
    return data_.covariates * w;
  }

  std::pair<double, Eigen::VectorXd> potential_and_gradient(
      const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd z =
        data_.labels.cwiseProduct(data_.covariates.transpose() * x);
    double u = 0.0;
    Eigen::VectorXd w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      u += log1p_exp_neg(z(i));
      w(i) = -sigmoid(-z(i)) * data_.labels(i);
    }
    return {u, data_.covariates * w};
  }

  Eigen::VectorXd per_datum_gradient(long i, const Eigen::VectorXd& x) const override {
    return logistic_per_datum_gradient(data_, i, x);
  }

  // Full Hessian is sum_i p_i (1-p_i) xi_i xi_i', so (1/4) sum ||xi_i||^2 bounds it.
  double hessian_norm_bound() const override { return hessian_bound_full_; }

 private:
  LogisticData data_;
  double hessian_bound_full_ = 0.0;
};

}  // namespace pdmc
