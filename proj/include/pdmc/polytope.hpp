#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <utility>

#include "pdmc/errors.hpp"
#include "pdmc/event_sim.hpp"
#include "pdmc/rng.hpp"

#include "json.hpp"

namespace pdmc {

/// First exit of the ray x + u*v from the polytope: the exit time and the
/// active face. tau_b = kInf when the ray never leaves.
struct BoundaryHit {
  double tau_b = kInf;
  int face = -1;
};

enum class VelocityLaw { gaussian_isotropic, uniform_sphere };

/// Convex domain given as an intersection of half-spaces g_m . x <= c_m.
/// Immutable after construction; safe to share across chains.
class Polytope {
 public:
  Polytope(Eigen::MatrixXd normals, Eigen::VectorXd offsets)
      : normals_(std::move(normals)), offsets_(std::move(offsets)) {
    if (normals_.rows() != offsets_.size()) {
      throw ConfigError("polytope: constraint count mismatch");
    }
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      if (normals_.row(m).norm() == 0.0) {
        throw ConfigError("polytope: zero normal in constraint " + std::to_string(m));
      }
    }
  }

  /// Checks nonempty interior via a strictly feasible point from the caller.
  Polytope(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
           const Eigen::VectorXd& interior_point)
      : Polytope(std::move(normals), std::move(offsets)) {
    if (!strictly_inside(interior_point)) {
      throw ConfigError("polytope: supplied point is not strictly feasible");
    }
  }

  static Polytope unrestricted(int dim) {
    return Polytope(Eigen::MatrixXd(0, dim), Eigen::VectorXd(0));
  }

  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const int d = static_cast<int>(lo.size());
    Eigen::MatrixXd g(2 * d, d);
    Eigen::VectorXd c(2 * d);
    g.setZero();
    for (int j = 0; j < d; ++j) {
      g(2 * j, j) = 1.0;
      c(2 * j) = hi(j);
      g(2 * j + 1, j) = -1.0;
      c(2 * j + 1) = -lo(j);
    }
    return Polytope(std::move(g), std::move(c), 0.5 * (lo + hi));
  }

  /// {x >= 0, sum_j x_j <= K}, the restricted domain of the logistic testbed.
  static Polytope nonneg_simplex(int dim, double K) {
    Eigen::MatrixXd g(dim + 1, dim);
    Eigen::VectorXd c(dim + 1);
    g.topRows(dim) = -Eigen::MatrixXd::Identity(dim, dim);
    c.head(dim).setZero();
    g.row(dim).setOnes();
    c(dim) = K;
    return Polytope(std::move(g), std::move(c),
                    Eigen::VectorXd::Constant(dim, K / (2.0 * dim)));
  }

  static Polytope from_json(const nlohmann::json& j) {
    Eigen::Index m = static_cast<Eigen::Index>(j.at("constraints").size());
    if (m == 0) throw ConfigError("polytope json: empty constraint list");
    const auto& first = j.at("constraints").at(0).at("g");
    Eigen::Index d = static_cast<Eigen::Index>(first.size());
    Eigen::MatrixXd g(m, d);
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& row = j.at("constraints").at(i);
      const auto& gv = row.at("g");
      if (static_cast<Eigen::Index>(gv.size()) != d) {
        throw ConfigError("polytope json: inconsistent dimension");
      }
      for (Eigen::Index k = 0; k < d; ++k) g(i, k) = gv.at(k).get<double>();
      c(i) = row.at("c").get<double>();
    }
    return Polytope(std::move(g), std::move(c));
  }

  nlohmann::json to_json() const {
    nlohmann::json constraints = nlohmann::json::array();
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      nlohmann::json row;
      row["g"] = std::vector<double>(normals_.row(m).begin(), normals_.row(m).end());
      row["c"] = offsets_(m);
      constraints.push_back(row);
    }
    return nlohmann::json{{"constraints", constraints}};
  }

  int dim() const { return static_cast<int>(normals_.cols()); }
  int num_constraints() const { return static_cast<int>(normals_.rows()); }
  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

  /// Membership with tolerance g.x <= c + 1e-9 (1 + |c|); guards against
  /// round-off expulsion right after a reflection.
  bool contains(const Eigen::VectorXd& x) const {
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      const double c = offsets_(m);
      if (normals_.row(m).dot(x) > c + 1e-9 * (1.0 + std::abs(c))) return false;
    }
    return true;
  }

  bool strictly_inside(const Eigen::VectorXd& x) const {
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      if (normals_.row(m).dot(x) >= offsets_(m)) return false;
    }
    return true;
  }

  /// tau_b = min over faces with g.v > 0 of (c - g.x) / (g.v). Slightly
  /// negative numerators from round-off at the boundary clamp to zero.
  BoundaryHit hit_time(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
    if (!contains(x)) throw OutsideDomain("hit_time: start point outside domain");
    BoundaryHit hit;
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      const double gv = normals_.row(m).dot(v);
      if (gv <= 0.0) continue;
      const double slack = offsets_(m) - normals_.row(m).dot(x);
      const double tau = std::max(slack, 0.0) / gv;
      if (tau < hit.tau_b) {
        hit.tau_b = tau;
        hit.face = static_cast<int>(m);
      }
    }
    return hit;
  }

  Eigen::VectorXd outward_normal(int face) const {
    return normals_.row(face).normalized();
  }

  /// Faces active at x (equality within tolerance) whose normal the velocity
  /// still points along; used for sequential corner handling.
  int first_outward_active_face(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
    for (Eigen::Index m = 0; m < normals_.rows(); ++m) {
      const double c = offsets_(m);
      const double slack = c - normals_.row(m).dot(x);
      if (std::abs(slack) <= 1e-9 * (1.0 + std::abs(c)) && normals_.row(m).dot(v) > 0.0) {
        return static_cast<int>(m);
      }
    }
    return -1;
  }

 private:
  Eigen::MatrixXd normals_;  // M x d, row m is g_m
  Eigen::VectorXd offsets_;  // c_m
};

/// v - 2 (v.n) n with unit normal n; norm-preserving involution.
template <typename DerivedV, typename DerivedN>
Eigen::VectorXd specular_reflect(const Eigen::MatrixBase<DerivedV>& v,
                                 const Eigen::MatrixBase<DerivedN>& n) {
  return v - 2.0 * v.dot(n) * n;
}

/// Raw velocity redraw from rho, ignoring the incoming velocity entirely.
/// Experimental: the redraw may point outward; the simulation loop retries
/// until inward, which conditions the law (see simulate()).
inline Eigen::VectorXd resample_boundary(VelocityLaw rho, int dim, Rng& rng) {
  return rho == VelocityLaw::uniform_sphere ? rng.unit_sphere(dim)
                                            : rng.gaussian_vector(dim);
}

}  // namespace pdmc
