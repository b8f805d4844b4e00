#pragma once

// Derivative-free Nelder-Mead simplex minimization on R^n.  Used for the
// outer predictor-weight search, where the objective (pre-treatment outcome
// MSPE of the inner fit) is piecewise smooth at best.
//
// Standard coefficients (reflect 1, expand 2, contract 1/2, shrink 1/2) and a
// deterministic tie-break: ordering is by objective value with the insertion
// order as secondary key, so a given start always walks the same path.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace synthcf {

struct NelderMeadOptions {
  int max_iterations = 500;
  double f_tol = 1e-9;      // spread of objective values across the simplex
  double x_tol = 1e-9;      // simplex diameter in the infinity norm
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts = {}) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult res;

  struct Vertex {
    Eigen::VectorXd x;
    double fx;
  };
  std::vector<Vertex> s;
  s.reserve(n + 1);
  s.push_back({x0, f(x0)});
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xi = x0;
    xi[i] += opts.initial_step;
    s.push_back({xi, f(xi)});
  }
  res.evaluations = n + 1;

  auto order = [&s]() {
    std::stable_sort(s.begin(), s.end(),
                     [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; });
  };
  order();

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    // Convergence: both objective spread and simplex size small.
    const double f_spread = std::abs(s.back().fx - s.front().fx);
    double x_diam = 0.0;
    for (int i = 1; i <= n; ++i)
      x_diam = std::max(x_diam, (s[i].x - s[0].x).template lpNorm<Eigen::Infinity>());
    if (f_spread <= opts.f_tol * (1.0 + std::abs(s.front().fx)) && x_diam <= opts.x_tol) {
      res.converged = true;
      break;
    }

    // Centroid of all but the worst vertex.
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += s[i].x;
    centroid /= n;

    const Vertex& worst = s[n];
    Eigen::VectorXd xr = centroid + (centroid - worst.x);
    double fr = f(xr);
    ++res.evaluations;

    if (fr < s[0].fx) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst.x);
      double fe = f(xe);
      ++res.evaluations;
      s[n] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < s[n - 1].fx) {
      s[n] = {xr, fr};
    } else {
      const bool outside = fr < worst.fx;
      Eigen::VectorXd xc;
      if (outside)
        xc = centroid + 0.5 * (xr - centroid);
      else
        xc = centroid - 0.5 * (centroid - worst.x);
      double fc = f(xc);
      ++res.evaluations;
      if (fc < (outside ? fr : worst.fx)) {
        s[n] = {xc, fc};
      } else {
        // Shrink toward the best vertex.
        for (int i = 1; i <= n; ++i) {
          s[i].x = s[0].x + 0.5 * (s[i].x - s[0].x);
          s[i].fx = f(s[i].x);
        }
        res.evaluations += n;
      }
    }
    order();
  }

  res.x = s[0].x;
  res.fx = s[0].fx;
  return res;
}

}  // namespace synthcf
