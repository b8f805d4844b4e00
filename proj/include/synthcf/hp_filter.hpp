#pragma once

// Hodrick-Prescott trend extraction:
//
//   minimize_tau  sum_t (y_t - tau_t)^2 + lambda * sum_t (d2 tau_t)^2
//
// whose normal equations are (I + lambda D'D) tau = y with D the second
// difference operator.  The system is pentadiagonal and solved by a banded
// LDL' factorization in O(T).
//
// For numerical robustness at extreme lambda the solve is split around the
// least-squares line fit of y: with r = y - line, tau = line + s where
// (I + lambda D'D) s = r.  This is an exact identity (affine sequences lie in
// the null space of D), and it keeps tau -> line well conditioned as
// lambda -> infinity even though the system's condition number grows like
// lambda.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace synthcf {

// Solve P x = b for symmetric positive-definite pentadiagonal P given as
// bands: d0 = diagonal (n), d1 = first off-diagonal (n-1), d2 = second
// off-diagonal (n-2).  Unit-lower-triangular banded LDL'.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> solve_pentadiagonal(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& d0,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& d1,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& d2,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& b) {
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const int n = static_cast<int>(d0.size());
  if (d1.size() != std::max(n - 1, 0) || d2.size() != std::max(n - 2, 0) ||
      b.size() != n)
    throw std::invalid_argument("solve_pentadiagonal: band size mismatch");
  if (n == 0) return Vec();

  Vec dd(n), l1(n), l2(n);
  l1.setZero();
  l2.setZero();
  for (int i = 0; i < n; ++i) {
    Scalar di = d0[i];
    if (i >= 2) {
      l2[i] = d2[i - 2] / dd[i - 2];
      di -= l2[i] * l2[i] * dd[i - 2];
    }
    if (i >= 1) {
      Scalar e = d1[i - 1];
      if (i >= 2) e -= l2[i] * l1[i - 1] * dd[i - 2];
      l1[i] = e / dd[i - 1];
      di -= l1[i] * l1[i] * dd[i - 1];
    }
    if (!(di > Scalar(0)))
      throw std::runtime_error("solve_pentadiagonal: matrix not positive definite");
    dd[i] = di;
  }

  Vec z = b;  // forward substitution L z = b
  for (int i = 1; i < n; ++i) {
    z[i] -= l1[i] * z[i - 1];
    if (i >= 2) z[i] -= l2[i] * z[i - 2];
  }
  for (int i = 0; i < n; ++i) z[i] /= dd[i];  // D^{-1}
  for (int i = n - 2; i >= 0; --i) {          // back substitution L' x = z
    z[i] -= l1[i + 1] * z[i + 1];
    if (i + 2 < n) z[i] -= l2[i + 2] * z[i + 2];
  }
  return z;
}

// Ordinary least-squares line fit against t = 0..n-1; returns fitted values.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> ols_line(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& y) {
  const int n = static_cast<int>(y.size());
  Eigen::Vector<Scalar, Eigen::Dynamic> fit(n);
  if (n == 1) {
    fit[0] = y[0];
    return fit;
  }
  const Scalar tbar = Scalar(n - 1) / Scalar(2);
  const Scalar ybar = y.mean();
  Scalar stt = 0, sty = 0;
  for (int i = 0; i < n; ++i) {
    const Scalar dt = Scalar(i) - tbar;
    stt += dt * dt;
    sty += dt * (y[i] - ybar);
  }
  const Scalar slope = sty / stt;
  for (int i = 0; i < n; ++i) fit[i] = ybar + slope * (Scalar(i) - tbar);
  return fit;
}

template <typename Scalar>
struct HpResult {
  Eigen::Vector<Scalar, Eigen::Dynamic> trend;
  Eigen::Vector<Scalar, Eigen::Dynamic> cycle;  // y - trend
};

template <typename Scalar>
HpResult<Scalar> hp_filter(const Eigen::Vector<Scalar, Eigen::Dynamic>& y,
                           Scalar lambda) {
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const int n = static_cast<int>(y.size());
  if (n == 0) throw std::invalid_argument("hp_filter: empty series");
  if (!y.allFinite()) throw std::invalid_argument("hp_filter: series must be finite");
  if (!(lambda >= Scalar(0)) || !std::isfinite(static_cast<double>(lambda)))
    throw std::invalid_argument("hp_filter: lambda must be finite and >= 0");

  HpResult<Scalar> out;
  if (lambda == Scalar(0) || n <= 2) {
    // No penalty, or too short for a second difference: the trend is exact.
    out.trend = y;
    out.cycle = Vec::Zero(n);
    return out;
  }

  // Bands of I + lambda D'D, with D the (n-2) x n second-difference operator
  // D_{k,k} = 1, D_{k,k+1} = -2, D_{k,k+2} = 1.
  Vec d0(n), d1(n - 1), d2(n - 2);
  for (int i = 0; i < n; ++i) {
    Scalar s = 0;
    for (int k = i - 2; k <= i; ++k)
      if (k >= 0 && k <= n - 3) {
        const Scalar dki = (k == i) ? Scalar(1) : (k == i - 1 ? Scalar(-2) : Scalar(1));
        s += dki * dki;
      }
    d0[i] = Scalar(1) + lambda * s;
  }
  for (int i = 0; i + 1 < n; ++i) {
    Scalar s = 0;
    if (i - 1 >= 0 && i - 1 <= n - 3) s += Scalar(-2) * Scalar(1);  // row i-1
    if (i <= n - 3) s += Scalar(1) * Scalar(-2);                    // row i
    d1[i] = lambda * s;
  }
  for (int i = 0; i + 2 < n; ++i) d2[i] = (i <= n - 3) ? lambda : Scalar(0);

  const Vec line = ols_line<Scalar>(y);
  const Vec r = y - line;
  const Vec s = solve_pentadiagonal<Scalar>(d0, d1, d2, r);
  out.trend = line + s;
  out.cycle = y - out.trend;
  return out;
}

}  // namespace synthcf
