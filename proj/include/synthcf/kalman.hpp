#pragma once

// Linear-Gaussian state space with a scalar observation:
//
//   alpha_{t+1} = T alpha_t + eta_t,   eta_t ~ N(0, Q)
//   y_t         = z' alpha_t + eps_t,  eps_t ~ N(0, h)
//   alpha_1     ~ N(a1, P1)
//
// Kalman filter, RTS smoother, and forward-filter backward-sampler (FFBS)
// used as the state-draw step of the structural time-series Gibbs sampler.
// Missing observations (NaN) skip the measurement update.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "synthcf/rng.hpp"

namespace synthcf {

struct StateSpace {
  Eigen::MatrixXd T;   // m x m transition
  Eigen::MatrixXd Q;   // m x m state noise covariance
  Eigen::VectorXd z;   // m observation loading
  double h = 1.0;      // observation noise variance
  Eigen::VectorXd a1;  // initial state mean
  Eigen::MatrixXd P1;  // initial state covariance

  int dim() const { return static_cast<int>(a1.size()); }
};

struct KalmanResult {
  Eigen::MatrixXd pred_mean;              // m x n, a_t = E[alpha_t | y_{1:t-1}]
  Eigen::MatrixXd filt_mean;              // m x n, m_t = E[alpha_t | y_{1:t}]
  std::vector<Eigen::MatrixXd> pred_cov;  // P_t
  std::vector<Eigen::MatrixXd> filt_cov;  // C_t
  double loglik = 0.0;
};

namespace detail {

// Square root of a small symmetric PSD matrix for sampling; negative
// eigenvalues from round-off are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline KalmanResult kalman_filter(const StateSpace& ss, const Eigen::VectorXd& y) {
  const int m = ss.dim();
  const int n = static_cast<int>(y.size());
  if (ss.T.rows() != m || ss.T.cols() != m || ss.Q.rows() != m || ss.z.size() != m ||
      ss.P1.rows() != m)
    throw std::invalid_argument("kalman_filter: inconsistent state dimensions");
  if (!(ss.h >= 0.0)) throw std::invalid_argument("kalman_filter: negative obs variance");

  KalmanResult r;
  r.pred_mean.resize(m, n);
  r.filt_mean.resize(m, n);
  r.pred_cov.resize(n);
  r.filt_cov.resize(n);

  Eigen::VectorXd a = ss.a1;
  Eigen::MatrixXd P = ss.P1;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);

  for (int t = 0; t < n; ++t) {
    r.pred_mean.col(t) = a;
    r.pred_cov[t] = P;

    if (std::isnan(y[t])) {
      r.filt_mean.col(t) = a;
      r.filt_cov[t] = P;
    } else {
      const double f = ss.z.dot(P * ss.z) + ss.h;
      if (!(f > 0.0)) throw std::runtime_error("kalman_filter: singular innovation variance");
      const double v = y[t] - ss.z.dot(a);
      const Eigen::VectorXd K = (P * ss.z) / f;
      r.filt_mean.col(t) = a + K * v;
      // Joseph form keeps the covariance symmetric positive semidefinite.
      const Eigen::MatrixXd A = I - K * ss.z.transpose();
      r.filt_cov[t] = A * P * A.transpose() + ss.h * K * K.transpose();
      r.loglik += -0.5 * (std::log(2.0 * M_PI * f) + v * v / f);
    }

    a = ss.T * r.filt_mean.col(t);
    P = ss.T * r.filt_cov[t] * ss.T.transpose() + ss.Q;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return r;
}

struct SmootherResult {
  Eigen::MatrixXd mean;                // m x n smoothed state means
  std::vector<Eigen::MatrixXd> cov;    // smoothed state covariances
};

inline SmootherResult kalman_smoother(const StateSpace& ss, const KalmanResult& kf) {
  const int m = ss.dim();
  const int n = static_cast<int>(kf.pred_mean.cols());
  SmootherResult s;
  s.mean.resize(m, n);
  s.cov.resize(n);
  if (n == 0) return s;

  s.mean.col(n - 1) = kf.filt_mean.col(n - 1);
  s.cov[n - 1] = kf.filt_cov[n - 1];
  for (int t = n - 2; t >= 0; --t) {
    const Eigen::MatrixXd& Pn = kf.pred_cov[t + 1];
    // J = C_t T' P_{t+1}^{-1}, via a solve against the (symmetric) predictive cov.
    const Eigen::MatrixXd J =
        Pn.ldlt().solve(ss.T * kf.filt_cov[t]).transpose();
    s.mean.col(t) = kf.filt_mean.col(t) + J * (s.mean.col(t + 1) - kf.pred_mean.col(t + 1));
    Eigen::MatrixXd C =
        kf.filt_cov[t] + J * (s.cov[t + 1] - Pn) * J.transpose();
    s.cov[t] = 0.5 * (C + C.transpose());
  }
  return s;
}

// One joint draw of the state path alpha_{1:n} | y_{1:n} (Carter-Kohn).
inline Eigen::MatrixXd ffbs_draw(const StateSpace& ss, const KalmanResult& kf, Rng& rng) {
  const int m = ss.dim();
  const int n = static_cast<int>(kf.pred_mean.cols());
  Eigen::MatrixXd draw(m, n);
  if (n == 0) return draw;

  draw.col(n - 1) =
      kf.filt_mean.col(n - 1) + detail::psd_sqrt(kf.filt_cov[n - 1]) * rng.normal_vector(m);
  for (int t = n - 2; t >= 0; --t) {
    const Eigen::MatrixXd& Pn = kf.pred_cov[t + 1];
    const Eigen::MatrixXd J =
        Pn.ldlt().solve(ss.T * kf.filt_cov[t]).transpose();
    const Eigen::VectorXd mean =
        kf.filt_mean.col(t) + J * (draw.col(t + 1) - kf.pred_mean.col(t + 1));
    Eigen::MatrixXd C = kf.filt_cov[t] - J * Pn * J.transpose();
    draw.col(t) = mean + detail::psd_sqrt(C) * rng.normal_vector(m);
  }
  return draw;
}

}  // namespace synthcf
