#pragma once

// Simplex-constrained weighted least squares: the inner problem of the nested
// synthetic-control optimization,
//
//   minimize  (b - A w)' diag(v) (b - A w)   over  w >= 0, sum(w) = 1.
//
// Solved by FISTA-accelerated projected gradient from the uniform start, with
// a Frank-Wolfe fallback if the accelerated scheme fails to certify optimality
// within its iteration budget.  The Frank-Wolfe gap doubles as an optimality
// certificate: for convex f on the simplex, f(w) - f* <= gap(w).
//
// Everything is deterministic: fixed start, fixed iteration order, no RNG.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace synthcf {

// Euclidean projection onto the probability simplex (sort-based algorithm).
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> project_to_simplex(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& y) {
  const int n = static_cast<int>(y.size());
  if (n == 0) throw std::invalid_argument("project_to_simplex: empty vector");
  std::vector<Scalar> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar css = 0;
  Scalar tau = (u[0] - Scalar(1));  // falls back to putting all mass on max
  for (int k = 0; k < n; ++k) {
    css += u[k];
    const Scalar t = (css - Scalar(1)) / Scalar(k + 1);
    if (k + 1 == n || u[k + 1] <= t) {
      tau = t;
      break;
    }
  }
  Eigen::Vector<Scalar, Eigen::Dynamic> w(n);
  for (int i = 0; i < n; ++i) w[i] = std::max(Scalar(0), y[i] - tau);
  return w;
}

struct SimplexLsOptions {
  int max_iterations = 20000;
  int fw_max_iterations = 50000;
  // Frank-Wolfe gap threshold, relative to the problem scale.  Correlated
  // donor panels routinely have cond(X0'X0) ~ 1e6, which puts the achievable
  // relative gap near 1e-10; 1e-9 certifies f - f* well below anything the
  // downstream tolerances can see without tripping on conditioning.
  double tol = 1e-9;
};

struct SimplexLsResult {
  Eigen::VectorXd w;
  double objective = 0.0;  // (b - A w)' diag(v) (b - A w) at the solution
  double gap = 0.0;        // Frank-Wolfe optimality gap at the solution
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Quadratic form pieces for f(w) = w'Qw - 2 c'w + c0.
struct SimplexQuadratic {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  double c0 = 0.0;

  double value(const Eigen::VectorXd& w) const {
    return w.dot(Q * w) - 2.0 * c.dot(w) + c0;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
    return 2.0 * (Q * w - c);
  }
  // max_{s in simplex} <-grad, s - w>
  double fw_gap(const Eigen::VectorXd& w, const Eigen::VectorXd& grad) const {
    return grad.dot(w) - grad.minCoeff();
  }
};

inline SimplexLsResult minimize_on_simplex(const SimplexQuadratic& q,
                                           const SimplexLsOptions& opts) {
  const int n = static_cast<int>(q.c.size());
  // Lipschitz constant of the gradient: 2 * lambda_max(Q).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.Q, Eigen::EigenvaluesOnly);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double L = std::max(2.0 * lmax, 1e-30);

  SimplexLsResult res;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd y = w;
  double t = 1.0;
  double fw = q.value(w);
  // The certificate tolerance is relative to the problem's own scale (the
  // objective at the equal-weights start), so rescaling the data rescales the
  // threshold with it instead of silently demanding an absolute 1e-12 gap.
  const double scale = std::max({1.0, std::abs(fw), std::abs(q.c0)});
  double gap_threshold = 0.0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd grad_y = q.gradient(y);
    Eigen::VectorXd w_next = project_to_simplex<double>(y - grad_y / L);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));

    // FISTA is not monotone; restart the momentum when the objective
    // backslides, otherwise take the usual extrapolated step.
    const double f_next = q.value(w_next);
    if (f_next > fw) {
      y = w_next;
      t_next = 1.0;
    } else {
      y = w_next + ((t - 1.0) / t_next) * (w_next - w);
      fw = f_next;
    }
    w = w_next;
    t = t_next;

    const Eigen::VectorXd grad = q.gradient(w);
    const double gap = q.fw_gap(w, grad);
    gap_threshold = opts.tol * std::max(scale, std::abs(fw));
    res.iterations = it + 1;
    if (gap <= gap_threshold) {
      res.w = w;
      res.objective = q.value(w);
      res.gap = gap;
      res.converged = true;
      return res;
    }
  }

  // Frank-Wolfe fallback with exact line search (objective is quadratic).
  for (int it = 0; it < opts.fw_max_iterations; ++it) {
    const Eigen::VectorXd grad = q.gradient(w);
    const double gap = q.fw_gap(w, grad);
    if (gap <= gap_threshold) {
      res.w = w;
      res.objective = q.value(w);
      res.gap = gap;
      res.converged = true;
      res.iterations += it;
      return res;
    }
    int j = 0;
    grad.minCoeff(&j);
    Eigen::VectorXd d = -w;
    d[j] += 1.0;
    const double dQd = d.dot(q.Q * d);
    double step = 1.0;
    if (dQd > 0.0) step = std::clamp(-0.5 * grad.dot(d) / dQd, 0.0, 1.0);
    if (step <= 0.0) break;
    w += step * d;
  }

  const Eigen::VectorXd grad = q.gradient(w);
  res.w = w;
  res.objective = q.value(w);
  res.gap = q.fw_gap(w, grad);
  res.converged = res.gap <= gap_threshold;
  return res;
}

}  // namespace detail

// Weighted simplex least squares; A is (k x J), b is (k), v is (k) nonnegative.
inline SimplexLsResult solve_simplex_ls(const Eigen::MatrixXd& A,
                                        const Eigen::VectorXd& b,
                                        const Eigen::VectorXd& v,
                                        const SimplexLsOptions& opts = {}) {
  if (A.rows() != b.size() || A.rows() != v.size())
    throw std::invalid_argument("solve_simplex_ls: dimension mismatch");
  if (A.cols() == 0) throw std::invalid_argument("solve_simplex_ls: no columns");
  if ((v.array() < 0.0).any())
    throw std::invalid_argument("solve_simplex_ls: negative metric weights");

  detail::SimplexQuadratic q;
  const Eigen::MatrixXd Av = v.asDiagonal() * A;
  q.Q = A.transpose() * Av;
  q.c = Av.transpose() * b;
  q.c0 = b.dot(v.asDiagonal() * b);
  // Symmetrize against round-off so the eigensolver sees an exact symmetric Q.
  q.Q = 0.5 * (q.Q + q.Q.transpose()).eval();
  return detail::minimize_on_simplex(q, opts);
}

// Unweighted convenience overload.
inline SimplexLsResult solve_simplex_ls(const Eigen::MatrixXd& A,
                                        const Eigen::VectorXd& b,
                                        const SimplexLsOptions& opts = {}) {
  return solve_simplex_ls(A, b, Eigen::VectorXd::Ones(A.rows()), opts);
}

// Zero out entries below eps and renormalize.  Reported weight vectors use
// this so that artifacts show a hard support.
inline Eigen::VectorXd sparsify_weights(const Eigen::VectorXd& w, double eps = 1e-8) {
  Eigen::VectorXd out = (w.array() < eps).select(0.0, w);
  const double s = out.sum();
  if (s > 0.0) out /= s;
  return out;
}

}  // namespace synthcf
