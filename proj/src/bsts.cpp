#include "synthcf/bsts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace synthcf {

namespace {

struct Standardizer {
  double mean = 0.0, sd = 1.0;
};

Standardizer fit_standardizer(const Eigen::VectorXd& x, const std::string& what) {
  Standardizer s;
  s.mean = x.mean();
  const double ss = (x.array() - s.mean).square().sum();
  if (x.size() < 2 || !(ss > 0.0))
    throw ValidationError(what + " is constant over the fitting window");
  s.sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  return s;
}

StateSpace make_state_space(TrendModel trend, double sigma_obs2, double sigma_level2,
                            double sigma_slope2) {
  StateSpace ss;
  const int m = trend == TrendModel::LocalLinear ? 2 : 1;
  ss.T = Eigen::MatrixXd::Identity(m, m);
  ss.Q = Eigen::MatrixXd::Zero(m, m);
  ss.z = Eigen::VectorXd::Zero(m);
  ss.z[0] = 1.0;
  ss.Q(0, 0) = sigma_level2;
  if (m == 2) {
    ss.T(0, 1) = 1.0;
    ss.Q(1, 1) = sigma_slope2;
  }
  ss.h = sigma_obs2;
  ss.a1 = Eigen::VectorXd::Zero(m);
  // Diffuse enough on the standardized scale that the data dominate, tight
  // enough for the Joseph-form filter to stay well conditioned.
  ss.P1 = 1e4 * Eigen::MatrixXd::Identity(m, m);
  return ss;
}

// Spike-and-slab sweep under the Zellner-g slab.  Integrating beta out of the
// likelihood gives, up to a shared constant,
//   log ml(gamma) = -(k/2) log(1+g) + (g/(1+g)) u' S^{-1} u / (2 sigma^2),
// with S = (X'X)_gamma and u = (X'r)_gamma; each gamma_j is Gibbs-updated
// from the resulting odds, then beta_gamma is drawn from its conjugate
// posterior N( f S^{-1} u, sigma^2 f S^{-1} ), f = g/(1+g).
void draw_regression(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& Xtr, double sigma2,
                     double g, double prior_pi, Rng& rng, std::vector<int>& gamma,
                     Eigen::VectorXd& beta) {
  const int J = static_cast<int>(gamma.size());
  const double f = g / (1.0 + g);
  const double log_prior_odds = std::log(prior_pi) - std::log1p(-prior_pi);

  auto quad = [&](const std::vector<int>& g_vec) {
    std::vector<int> idx;
    for (int j = 0; j < J; ++j)
      if (g_vec[static_cast<std::size_t>(j)]) idx.push_back(j);
    if (idx.empty()) return 0.0;
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd S(k, k);
    Eigen::VectorXd u(k);
    for (int a = 0; a < k; ++a) {
      u[a] = Xtr[idx[static_cast<std::size_t>(a)]];
      for (int b = 0; b < k; ++b)
        S(a, b) = XtX(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      return -std::numeric_limits<double>::infinity();
    return u.dot(ldlt.solve(u));
  };

  double q_cur = quad(gamma);
  for (int j = 0; j < J; ++j) {
    std::vector<int> flipped = gamma;
    flipped[static_cast<std::size_t>(j)] ^= 1;
    const double q_flip = quad(flipped);
    const bool to_on = flipped[static_cast<std::size_t>(j)] == 1;
    double log_odds_on;  // gamma_j = 1 vs 0, everything else fixed
    if (to_on)
      log_odds_on = log_prior_odds - 0.5 * std::log1p(g) +
                    f * (q_flip - q_cur) / (2.0 * sigma2);
    else
      log_odds_on = log_prior_odds - 0.5 * std::log1p(g) +
                    f * (q_cur - q_flip) / (2.0 * sigma2);
    const double p_on = 1.0 / (1.0 + std::exp(-log_odds_on));
    const bool on = rng.bernoulli(p_on);
    if (on != (gamma[static_cast<std::size_t>(j)] == 1)) {
      gamma[static_cast<std::size_t>(j)] = on ? 1 : 0;
      q_cur = q_flip;
    }
  }

  beta.setZero();
  std::vector<int> idx;
  for (int j = 0; j < J; ++j)
    if (gamma[static_cast<std::size_t>(j)]) idx.push_back(j);
  if (idx.empty()) return;
  const int k = static_cast<int>(idx.size());
  Eigen::MatrixXd S(k, k);
  Eigen::VectorXd u(k);
  for (int a = 0; a < k; ++a) {
    u[a] = Xtr[idx[static_cast<std::size_t>(a)]];
    for (int b = 0; b < k; ++b)
      S(a, b) = XtX(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return;  // degenerate subset: leave beta at 0
  const Eigen::VectorXd mean = f * llt.solve(u);
  // chol(S) = L L'  =>  cov = sigma^2 f S^{-1} has factor sqrt(sigma^2 f) L^{-T}.
  const Eigen::VectorXd noise =
      llt.matrixL().transpose().solve(rng.normal_vector(k)) * std::sqrt(sigma2 * f);
  for (int a = 0; a < k; ++a) beta[idx[static_cast<std::size_t>(a)]] = mean[a] + noise[a];
}

double potential_scale_reduction(const std::vector<Eigen::VectorXd>& chains) {
  const int C = static_cast<int>(chains.size());
  const auto L = chains.front().size();
  Eigen::VectorXd means(C), vars(C);
  for (int c = 0; c < C; ++c) {
    means[c] = chains[static_cast<std::size_t>(c)].mean();
    vars[c] = (chains[static_cast<std::size_t>(c)].array() - means[c]).square().sum() /
              static_cast<double>(L - 1);
  }
  const double W = vars.mean();
  const double B = static_cast<double>(L) *
                   (means.array() - means.mean()).square().sum() / (C - 1);
  const double var_plus =
      (static_cast<double>(L - 1) / L) * W + B / static_cast<double>(L);
  return W > 0.0 ? std::sqrt(var_plus / W) : 1.0;
}

}  // namespace

double sample_quantile(const Eigen::VectorXd& sorted_values, double q) {
  const auto n = sorted_values.size();
  if (n == 0) throw ValidationError("sample_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("sample_quantile: q outside [0,1]");
  if (n == 1) return sorted_values[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac;
}

double effective_sample_size(const Eigen::VectorXd& chain) {
  const auto n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = chain.mean();
  const Eigen::VectorXd x = chain.array() - mean;
  const double c0 = x.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  auto rho = [&](Eigen::Index k) {
    double s = 0.0;
    for (Eigen::Index t = 0; t + k < n; ++t) s += x[t] * x[t + k];
    return s / (static_cast<double>(n) * c0);
  };

  // Geyer's initial positive sequence: sum paired autocorrelations while the
  // pair sums stay positive.
  double acc = 0.0;
  for (Eigen::Index k = 1; k + 1 < n; k += 2) {
    const double pair = rho(k) + rho(k + 1);
    if (pair <= 0.0) break;
    acc += pair;
  }
  const double denom = 1.0 + 2.0 * acc;
  return std::max(1.0, static_cast<double>(n) / std::max(denom, 1e-12));
}

BstsFit fit_bsts(const Eigen::VectorXd& y_pre, const Eigen::MatrixXd& controls_pre,
                 const BstsOptions& opts, const std::vector<std::string>& control_names) {
  const int T = static_cast<int>(y_pre.size());
  const int J = static_cast<int>(controls_pre.cols());
  if (T < 5) throw ValidationError("bsts: need at least 5 fitting observations");
  if (J > 0 && controls_pre.rows() != T)
    throw ValidationError("bsts: controls and outcome have different lengths");
  if (!y_pre.allFinite() || (J > 0 && !controls_pre.allFinite()))
    throw ValidationError("bsts: non-finite value in the fitting window");
  if (opts.n_draws <= opts.burn_in || opts.burn_in < 0)
    throw ValidationError("bsts: n_draws must exceed burn_in");
  if (!control_names.empty() && static_cast<int>(control_names.size()) != J)
    throw ValidationError("bsts: control_names length mismatch");

  BstsFit fit;
  fit.opts = opts;
  fit.n_controls = J;
  fit.n_pre = T;
  fit.control_names = control_names;
  if (fit.control_names.empty())
    for (int j = 0; j < J; ++j) fit.control_names.push_back("x" + std::to_string(j + 1));

  // Standardize to pre-period mean 0 / variance 1.
  const Standardizer sy = fit_standardizer(y_pre, "bsts: outcome");
  fit.y_mean = sy.mean;
  fit.y_sd = sy.sd;
  const Eigen::VectorXd y = (y_pre.array() - sy.mean) / sy.sd;
  fit.control_mean.resize(J);
  fit.control_sd.resize(J);
  Eigen::MatrixXd X(T, J);
  for (int j = 0; j < J; ++j) {
    const Standardizer sx =
        fit_standardizer(controls_pre.col(j), "bsts: control '" + fit.control_names[j] + "'");
    fit.control_mean[j] = sx.mean;
    fit.control_sd[j] = sx.sd;
    X.col(j) = (controls_pre.col(j).array() - sx.mean) / sx.sd;
  }

  const int m = opts.trend == TrendModel::LocalLinear ? 2 : 1;
  const double g = opts.zellner_g > 0.0 ? opts.zellner_g : static_cast<double>(T);
  const double prior_pi =
      J > 0 ? std::min(0.5, opts.expected_model_size / static_cast<double>(J)) : 0.0;
  // Standardization makes the sample variance of y exactly 1, so each
  // inverse-gamma prior scale is just its scale_factor.
  const double obs_scale = opts.obs_prior.scale_factor;
  const double level_scale = opts.level_prior.scale_factor;
  const double slope_scale = opts.slope_prior.scale_factor;

  const int kept = opts.n_draws - opts.burn_in;
  fit.sigma_obs2.resize(kept);
  fit.sigma_level2.resize(kept);
  fit.sigma_slope2 = Eigen::VectorXd::Zero(kept);
  fit.beta = Eigen::MatrixXd::Zero(kept, J);
  fit.gamma = Eigen::MatrixXd::Zero(kept, J);
  fit.final_state.resize(kept, m);
  fit.state_mean = Eigen::MatrixXd::Zero(m, T);
  fit.inclusion_prob = Eigen::VectorXd::Zero(J);

  const Eigen::MatrixXd XtX = J > 0 ? (X.transpose() * X).eval() : Eigen::MatrixXd();

  std::vector<Eigen::VectorXd> sigma_chains;
  for (int chain = 0; chain < std::max(1, opts.n_chains); ++chain) {
    Rng rng(mix_seed(opts.seed, 0xb5a0 + static_cast<std::uint64_t>(chain)));
    double sigma_obs2 = 1.0, sigma_level2 = 0.01, sigma_slope2 = 0.01;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(J);
    std::vector<int> gamma(static_cast<std::size_t>(J), 0);
    Eigen::VectorXd sigma_chain(kept);

    for (int it = 0; it < opts.n_draws; ++it) {
      // 1. States given everything else.
      const StateSpace ss = make_state_space(opts.trend, sigma_obs2, sigma_level2,
                                             opts.trend == TrendModel::LocalLinear
                                                 ? sigma_slope2
                                                 : 0.0);
      const Eigen::VectorXd y_adj = J > 0 ? (y - X * beta).eval() : y;
      const KalmanResult kf = kalman_filter(ss, y_adj);
      const Eigen::MatrixXd alpha = ffbs_draw(ss, kf, rng);

      // 2. State variances from their increments.
      double ss_level = 0.0, ss_slope = 0.0;
      for (int t = 0; t + 1 < T; ++t) {
        const double slope = m == 2 ? alpha(1, t) : 0.0;
        const double dl = alpha(0, t + 1) - alpha(0, t) - slope;
        ss_level += dl * dl;
        if (m == 2) {
          const double dsl = alpha(1, t + 1) - alpha(1, t);
          ss_slope += dsl * dsl;
        }
      }
      const double half_n = 0.5 * static_cast<double>(T - 1);
      sigma_level2 = rng.inv_gamma(opts.level_prior.shape + half_n,
                                   level_scale + 0.5 * ss_level);
      if (m == 2)
        sigma_slope2 = rng.inv_gamma(opts.slope_prior.shape + half_n,
                                     slope_scale + 0.5 * ss_slope);

      // 3. Regression given the trend.
      const Eigen::VectorXd resid_trend = y - alpha.row(0).transpose();
      if (J > 0) {
        const Eigen::VectorXd Xtr = X.transpose() * resid_trend;
        draw_regression(XtX, Xtr, sigma_obs2, g, prior_pi, rng, gamma, beta);
      }

      // 4. Observation variance from the full residual.
      const Eigen::VectorXd resid =
          J > 0 ? (resid_trend - X * beta).eval() : resid_trend;
      sigma_obs2 = rng.inv_gamma(opts.obs_prior.shape + 0.5 * static_cast<double>(T),
                                 obs_scale + 0.5 * resid.squaredNorm());

      if (it < opts.burn_in) continue;
      const int d = it - opts.burn_in;
      sigma_chain[d] = sigma_obs2;
      if (chain == 0) {
        fit.sigma_obs2[d] = sigma_obs2;
        fit.sigma_level2[d] = sigma_level2;
        if (m == 2) fit.sigma_slope2[d] = sigma_slope2;
        for (int j = 0; j < J; ++j) {
          fit.beta(d, j) = beta[j];
          fit.gamma(d, j) = gamma[static_cast<std::size_t>(j)];
        }
        fit.final_state.row(d) = alpha.col(T - 1).transpose();
        fit.state_mean += alpha;
      }
    }
    sigma_chains.push_back(std::move(sigma_chain));
    if (opts.n_chains <= 1) break;
  }

  fit.state_mean /= static_cast<double>(kept);
  if (J > 0) fit.inclusion_prob = fit.gamma.colwise().mean();
  fit.diagnostics.ess_sigma_obs = effective_sample_size(fit.sigma_obs2);
  if (sigma_chains.size() > 1)
    fit.diagnostics.rhat_sigma_obs = potential_scale_reduction(sigma_chains);
  if (fit.diagnostics.ess_sigma_obs < 100.0)
    fit.diagnostics.warnings.push_back("low effective sample size for sigma_obs");
  if (fit.diagnostics.rhat_sigma_obs > 1.1)
    fit.diagnostics.warnings.push_back("sigma_obs R-hat above 1.1");
  return fit;
}

ImpactPosterior predict_counterfactual(const BstsFit& fit, const Eigen::VectorXd& actual_post,
                                       const Eigen::MatrixXd& controls_post,
                                       const std::vector<int>& years,
                                       std::uint64_t forecast_seed_offset) {
  const int H = static_cast<int>(actual_post.size());
  const int J = fit.n_controls;
  if (H == 0) throw ValidationError("bsts: empty post window");
  if (static_cast<int>(years.size()) != H)
    throw ValidationError("bsts: years and actual_post length mismatch");
  if (J > 0 && (controls_post.rows() != H || controls_post.cols() != J))
    throw ValidationError("bsts: controls_post has the wrong shape");

  Eigen::MatrixXd Xp(H, J);
  for (int j = 0; j < J; ++j)
    Xp.col(j) = (controls_post.col(j).array() - fit.control_mean[j]) / fit.control_sd[j];

  const int D = fit.n_kept();
  const int m = fit.state_dim();
  ImpactPosterior post;
  post.years = years;
  post.actual = actual_post;
  post.draws.resize(D, H);
  post.inclusion_prob = fit.inclusion_prob;
  post.diagnostics = fit.diagnostics;

  Rng rng(mix_seed(fit.opts.seed, 0xf0c0 + forecast_seed_offset));
  for (int d = 0; d < D; ++d) {
    Eigen::VectorXd alpha = fit.final_state.row(d).transpose();
    const double s_level = std::sqrt(fit.sigma_level2[d]);
    const double s_slope = m == 2 ? std::sqrt(fit.sigma_slope2[d]) : 0.0;
    const double s_obs = std::sqrt(fit.sigma_obs2[d]);
    for (int t = 0; t < H; ++t) {
      // Roll the trend one year forward, then observe.
      if (m == 2) {
        alpha[0] += alpha[1] + s_level * rng.normal();
        alpha[1] += s_slope * rng.normal();
      } else {
        alpha[0] += s_level * rng.normal();
      }
      double y_std = alpha[0] + s_obs * rng.normal();
      if (J > 0) y_std += Xp.row(t).dot(fit.beta.row(d));
      post.draws(d, t) = fit.y_mean + fit.y_sd * y_std;
    }
  }

  auto summarize = [&](const Eigen::MatrixXd& M, Eigen::VectorXd& mean, Eigen::VectorXd& lo,
                       Eigen::VectorXd& median, Eigen::VectorXd& hi) {
    mean.resize(H);
    lo.resize(H);
    median.resize(H);
    hi.resize(H);
    Eigen::VectorXd col(D);
    for (int t = 0; t < H; ++t) {
      col = M.col(t);
      std::sort(col.data(), col.data() + D);
      mean[t] = M.col(t).mean();
      lo[t] = sample_quantile(col, 0.025);
      median[t] = sample_quantile(col, 0.5);
      hi[t] = sample_quantile(col, 0.975);
    }
  };

  summarize(post.draws, post.cf_mean, post.cf_lo, post.cf_median, post.cf_hi);

  Eigen::MatrixXd effect(D, H), cum(D, H);
  for (int t = 0; t < H; ++t)
    effect.col(t) = Eigen::VectorXd::Constant(D, actual_post[t]) - post.draws.col(t);
  cum.col(0) = effect.col(0);
  for (int t = 1; t < H; ++t) cum.col(t) = cum.col(t - 1) + effect.col(t);

  summarize(effect, post.effect_mean, post.effect_lo, post.effect_median, post.effect_hi);
  summarize(cum, post.cum_effect_mean, post.cum_effect_lo, post.cum_effect_median,
            post.cum_effect_hi);

  post.p_cum_negative.resize(H);
  for (int t = 0; t < H; ++t)
    post.p_cum_negative[t] =
        (cum.col(t).array() < 0.0).cast<double>().mean();

  post.diagnostics.ess_effect = effective_sample_size(effect.col(H - 1));
  return post;
}

ImpactSummary impact_report(const ImpactPosterior& posterior) {
  ImpactSummary s;
  const int H = static_cast<int>(posterior.years.size());
  for (int t = 0; t < H; ++t) {
    ImpactSummary::Row r;
    r.year = posterior.years[static_cast<std::size_t>(t)];
    r.actual = posterior.actual[t];
    r.cf_mean = posterior.cf_mean[t];
    r.cf_lo = posterior.cf_lo[t];
    r.cf_hi = posterior.cf_hi[t];
    r.effect_mean = posterior.effect_mean[t];
    r.effect_lo = posterior.effect_lo[t];
    r.effect_hi = posterior.effect_hi[t];
    r.cum_effect_mean = posterior.cum_effect_mean[t];
    r.cum_effect_lo = posterior.cum_effect_lo[t];
    r.cum_effect_hi = posterior.cum_effect_hi[t];
    r.p_cum_negative = posterior.p_cum_negative[t];
    s.rows.push_back(r);
  }
  if (H > 0) {
    s.final_p_cum_negative = posterior.p_cum_negative[H - 1];
    s.final_mean_gap = posterior.cf_mean[H - 1] - posterior.actual[H - 1];
  }
  return s;
}

}  // namespace synthcf
