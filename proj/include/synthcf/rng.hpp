#pragma once

// Deterministic random number generation.
//
// std::mt19937_64 is bit-exact across platforms, but the standard library's
// distribution objects are not (the spec leaves their algorithms open).  All
// sampling here is hand-rolled on top of the raw engine so that a given seed
// reproduces the same stream everywhere: byte-identical artifacts depend on it.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace synthcf {

// SplitMix64 step, used to derive well-separated per-job seeds from a base
// seed and a stable job index.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1), for logs and inverse-CDF style uses.
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // uniform on {0, ..., n-1}
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int>(x % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Marsaglia's polar method (no trig, loop count is part
  // of the deterministic stream).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double gamma(double shape, double scale) { return scale * gamma(shape); }

  // Inverse-gamma with shape a and scale b: density ~ x^{-a-1} exp(-b/x).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape); }

  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  bool bernoulli(double p) { return uniform() < p; }

  // Dirichlet via normalized gammas; alpha broadcast as a flat concentration.
  Eigen::VectorXd dirichlet(int n, double alpha = 1.0) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = gamma(alpha);
    const double s = g.sum();
    if (s <= 0.0) return Eigen::VectorXd::Constant(n, 1.0 / n);
    return g / s;
  }

  Eigen::VectorXd normal_vector(int n, double mean = 0.0, double sd = 1.0) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = normal(mean, sd);
    return x;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace synthcf
