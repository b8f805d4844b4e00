#include <doctest.h>

#include <cmath>

#include "synthcf/kalman.hpp"
#include "synthcf/rng.hpp"

using namespace synthcf;

namespace {

StateSpace local_level(double q, double h, double a1 = 0.0, double p1 = 10.0) {
  StateSpace ss;
  ss.T = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ss.Q = Eigen::MatrixXd::Constant(1, 1, q);
  ss.z = Eigen::VectorXd::Constant(1, 1.0);
  ss.h = h;
  ss.a1 = Eigen::VectorXd::Constant(1, a1);
  ss.P1 = Eigen::MatrixXd::Constant(1, 1, p1);
  return ss;
}

StateSpace local_linear(double q_level, double q_slope, double h) {
  StateSpace ss;
  ss.T.resize(2, 2);
  ss.T << 1.0, 1.0, 0.0, 1.0;
  ss.Q = Eigen::MatrixXd::Zero(2, 2);
  ss.Q(0, 0) = q_level;
  ss.Q(1, 1) = q_slope;
  ss.z = Eigen::VectorXd::Zero(2);
  ss.z[0] = 1.0;
  ss.h = h;
  ss.a1 = Eigen::VectorXd::Zero(2);
  ss.P1 = 10.0 * Eigen::MatrixXd::Identity(2, 2);
  return ss;
}

// Batch oracle: for the local level model the joint distribution of
// (alpha_1..alpha_n, y_1..y_n) is Gaussian, so the smoothed means solve
//   (Prec_prior + Z' Z / h) alpha = Z' y / h + Prec_prior-weighted prior mean
// with Prec_prior the tridiagonal random-walk precision including the initial
// variance.  Entirely independent of the filter implementation.
Eigen::VectorXd batch_smoother_local_level(const Eigen::VectorXd& y, double q, double h,
                                           double a1, double p1) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(n, n);
  prec(0, 0) += 1.0 / p1;
  for (int t = 0; t + 1 < n; ++t) {
    prec(t, t) += 1.0 / q;
    prec(t + 1, t + 1) += 1.0 / q;
    prec(t, t + 1) -= 1.0 / q;
    prec(t + 1, t) -= 1.0 / q;
  }
  Eigen::VectorXd rhs = y / h;
  rhs[0] += a1 / p1;
  for (int t = 0; t < n; ++t) prec(t, t) += 1.0 / h;
  return prec.ldlt().solve(rhs);
}

// Scalar Kalman recursion written out longhand for the local level model.
struct ScalarKalman {
  std::vector<double> filt_mean, filt_var;
  double loglik = 0.0;
};

ScalarKalman scalar_filter(const Eigen::VectorXd& y, double q, double h, double a1,
                           double p1) {
  ScalarKalman out;
  double a = a1, p = p1;
  for (int t = 0; t < y.size(); ++t) {
    const double f = p + h;
    const double k = p / f;
    const double v = y[t] - a;
    const double m = a + k * v;
    const double c = p * (1.0 - k);
    out.loglik += -0.5 * (std::log(2.0 * M_PI * f) + v * v / f);
    out.filt_mean.push_back(m);
    out.filt_var.push_back(c);
    a = m;
    p = c + q;
  }
  return out;
}

}  // namespace

TEST_CASE("kalman filter matches the scalar longhand recursion") {
  Rng rng(31);
  Eigen::VectorXd y(40);
  double mu = 0.0;
  for (int t = 0; t < 40; ++t) {
    mu += rng.normal(0.0, 0.3);
    y[t] = mu + rng.normal(0.0, 0.7);
  }
  const double q = 0.09, h = 0.49, a1 = 0.0, p1 = 10.0;
  const KalmanResult kf = kalman_filter(local_level(q, h, a1, p1), y);
  const ScalarKalman oracle = scalar_filter(y, q, h, a1, p1);
  CHECK(kf.loglik == doctest::Approx(oracle.loglik).epsilon(1e-12));
  for (int t = 0; t < 40; ++t) {
    CHECK(kf.filt_mean(0, t) ==
          doctest::Approx(oracle.filt_mean[static_cast<std::size_t>(t)]).epsilon(1e-12));
    CHECK(kf.filt_cov[static_cast<std::size_t>(t)](0, 0) ==
          doctest::Approx(oracle.filt_var[static_cast<std::size_t>(t)]).epsilon(1e-12));
  }
}

TEST_CASE("smoother matches the batch joint-Gaussian oracle") {
  Rng rng(32);
  Eigen::VectorXd y(25);
  double mu = 1.0;
  for (int t = 0; t < 25; ++t) {
    mu += rng.normal(0.0, 0.5);
    y[t] = mu + rng.normal(0.0, 1.0);
  }
  const double q = 0.25, h = 1.0, a1 = 0.0, p1 = 10.0;
  const StateSpace ss = local_level(q, h, a1, p1);
  const SmootherResult sm = kalman_smoother(ss, kalman_filter(ss, y));
  const Eigen::VectorXd oracle = batch_smoother_local_level(y, q, h, a1, p1);
  for (int t = 0; t < 25; ++t)
    CHECK(sm.mean(0, t) == doctest::Approx(oracle[t]).epsilon(1e-9));
  // At the last step, smoothing adds nothing to filtering.
  const KalmanResult kf = kalman_filter(ss, y);
  CHECK(sm.mean(0, 24) == doctest::Approx(kf.filt_mean(0, 24)).epsilon(1e-12));
}

TEST_CASE("missing observations skip the measurement update") {
  const StateSpace ss = local_level(0.1, 0.5);
  Eigen::VectorXd y(5);
  y << 1.0, std::nan(""), 1.2, std::nan(""), 1.4;
  const KalmanResult kf = kalman_filter(ss, y);
  // A missing y leaves the filtered state equal to the prediction.
  CHECK(kf.filt_mean(0, 1) == kf.pred_mean(0, 1));
  CHECK(kf.filt_cov[1](0, 0) == kf.pred_cov[1](0, 0));
  CHECK(std::isfinite(kf.loglik));
}

TEST_CASE("filter rejects inconsistent dimensions") {
  StateSpace ss = local_level(0.1, 0.5);
  ss.z = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(kalman_filter(ss, Eigen::VectorXd::Ones(4)), std::invalid_argument);
}

TEST_CASE("ffbs draws average to the smoothed mean") {
  Rng data_rng(33);
  Eigen::VectorXd y(20);
  double mu = 0.0;
  for (int t = 0; t < 20; ++t) {
    mu += data_rng.normal(0.0, 0.4);
    y[t] = mu + data_rng.normal(0.0, 0.8);
  }
  const StateSpace ss = local_level(0.16, 0.64);
  const KalmanResult kf = kalman_filter(ss, y);
  const SmootherResult sm = kalman_smoother(ss, kf);

  const int n_draws = 20000;
  Rng rng(34);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(1, 20);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(1, 20);
  for (int d = 0; d < n_draws; ++d) {
    const Eigen::MatrixXd draw = ffbs_draw(ss, kf, rng);
    mean += draw;
    second += draw.cwiseProduct(draw);
  }
  mean /= n_draws;
  second /= n_draws;

  for (int t = 0; t < 20; ++t) {
    const double sd = std::sqrt(sm.cov[static_cast<std::size_t>(t)](0, 0));
    const double mc_se = sd / std::sqrt(static_cast<double>(n_draws));
    // Monte Carlo mean within 4 standard errors of the exact smoother mean.
    CHECK(std::abs(mean(0, t) - sm.mean(0, t)) < 4.0 * mc_se);
    // Sample variance close to the smoothed variance (loose relative check).
    const double var = second(0, t) - mean(0, t) * mean(0, t);
    CHECK(var == doctest::Approx(sd * sd).epsilon(0.08));
  }
}

TEST_CASE("ffbs works for the two-dimensional local linear trend") {
  Rng data_rng(35);
  Eigen::VectorXd y(18);
  double level = 0.0, slope = 0.2;
  for (int t = 0; t < 18; ++t) {
    level += slope + data_rng.normal(0.0, 0.2);
    slope += data_rng.normal(0.0, 0.05);
    y[t] = level + data_rng.normal(0.0, 0.5);
  }
  const StateSpace ss = local_linear(0.04, 0.0025, 0.25);
  const KalmanResult kf = kalman_filter(ss, y);
  const SmootherResult sm = kalman_smoother(ss, kf);

  Rng rng(36);
  const int n_draws = 8000;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 18);
  for (int d = 0; d < n_draws; ++d) mean += ffbs_draw(ss, kf, rng);
  mean /= n_draws;
  for (int t = 0; t < 18; ++t)
    for (int i = 0; i < 2; ++i) {
      const double sd = std::sqrt(sm.cov[static_cast<std::size_t>(t)](i, i));
      CHECK(std::abs(mean(i, t) - sm.mean(i, t)) <
            4.0 * sd / std::sqrt(static_cast<double>(n_draws)));
    }
}

TEST_CASE("ffbs is deterministic for a fixed seed") {
  Eigen::VectorXd y(10);
  for (int t = 0; t < 10; ++t) y[t] = std::sin(0.3 * t);
  const StateSpace ss = local_level(0.1, 0.2);
  const KalmanResult kf = kalman_filter(ss, y);
  Rng r1(99), r2(99);
  const Eigen::MatrixXd d1 = ffbs_draw(ss, kf, r1);
  const Eigen::MatrixXd d2 = ffbs_draw(ss, kf, r2);
  CHECK((d1 - d2).lpNorm<Eigen::Infinity>() == 0.0);
}
