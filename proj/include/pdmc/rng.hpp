#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace pdmc {

/// Seeded random source with explicitly coded transforms so that a given
/// seed produces the same stream on every platform (std::*_distribution
/// output is implementation-defined; we avoid it).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Exp(1) by inverse CDF, -log(1 - U).
  double exponential() { return -std::log1p(-uniform()); }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n) via multiply-shift on the raw 64-bit word.
  std::int64_t uniform_int(std::int64_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n);
    return static_cast<std::int64_t>(wide >> 64);
  }

  Eigen::VectorXd gaussian_vector(int d) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = normal();
    return z;
  }

  Eigen::VectorXd unit_sphere(int d) {
    Eigen::VectorXd z = gaussian_vector(d);
    double n = z.norm();
    while (n == 0.0) {
      z = gaussian_vector(d);
      n = z.norm();
    }
    return z / n;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pdmc
