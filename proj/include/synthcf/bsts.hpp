#pragma once

// Bayesian structural time series counterfactual.  Observation equation
//
//   y_t = mu_t + x_t' beta + eps_t,    eps_t ~ N(0, sigma_obs^2)
//
// with a local-level or local-linear trend state mu_t and a spike-and-slab
// (stochastic search variable selection) prior over the control-series
// regression.  Estimation is Gibbs: FFBS state draws, conjugate inverse-gamma
// variance draws, and SSVS coefficient draws under a Zellner-g slab.  The
// fitted model is projected over the post-period to form the posterior
// predictive counterfactual; effects are actual minus counterfactual.
//
// The treated series and every control are standardized internally to
// pre-period mean 0 / variance 1; outputs are mapped back to original units.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "synthcf/errors.hpp"
#include "synthcf/kalman.hpp"
#include "synthcf/rng.hpp"

namespace synthcf {

enum class TrendModel { LocalLevel, LocalLinear };

struct VariancePrior {
  double shape = 0.01;         // inverse-gamma shape
  double scale_factor = 0.01;  // scale = scale_factor * sample variance of y
};

struct BstsOptions {
  TrendModel trend = TrendModel::LocalLinear;
  int n_draws = 10000;  // total Gibbs iterations
  int burn_in = 2000;   // discarded prefix
  int n_chains = 1;     // extra chains only feed convergence diagnostics
  std::uint64_t seed = 2014;
  double expected_model_size = 3.0;  // SSVS prior: pi = min(0.5, this / J)
  double zellner_g = 0.0;            // 0 -> use pre-period length
  VariancePrior obs_prior;
  VariancePrior level_prior{0.01, 0.01};
  VariancePrior slope_prior{0.01, 0.01};
};

struct BstsDiagnostics {
  double ess_sigma_obs = 0.0;
  double ess_effect = 0.0;  // filled in by predict_counterfactual (final-year effect)
  double rhat_sigma_obs = 0.0;  // 0 when a single chain
  std::vector<std::string> warnings;
};

struct BstsFit {
  BstsOptions opts;
  int n_controls = 0;
  int n_pre = 0;
  // Standardization constants (pre-period).
  double y_mean = 0.0, y_sd = 1.0;
  Eigen::VectorXd control_mean, control_sd;
  // Kept draws (rows = draws), all on the standardized scale.
  Eigen::VectorXd sigma_obs2, sigma_level2, sigma_slope2;
  Eigen::MatrixXd beta;         // D x J
  Eigen::MatrixXd gamma;        // D x J inclusion indicators (0/1)
  Eigen::MatrixXd final_state;  // D x m, state at the last pre-period year
  Eigen::MatrixXd state_mean;   // m x T_pre, posterior mean of states (diagnostic)
  Eigen::VectorXd inclusion_prob;  // per control
  BstsDiagnostics diagnostics;
  std::vector<std::string> control_names;

  int n_kept() const { return static_cast<int>(sigma_obs2.size()); }
  int state_dim() const { return opts.trend == TrendModel::LocalLinear ? 2 : 1; }
};

// y_pre: treated outcomes over the fitting window; controls_pre: T_pre x J
// control series over the same window.  J = 0 (no regression) is allowed.
BstsFit fit_bsts(const Eigen::VectorXd& y_pre, const Eigen::MatrixXd& controls_pre,
                 const BstsOptions& opts,
                 const std::vector<std::string>& control_names = {});

struct ImpactPosterior {
  std::vector<int> years;      // post-period years
  Eigen::VectorXd actual;      // observed treated path (original units)
  Eigen::MatrixXd draws;       // D x T_post counterfactual draws (original units)
  // Pointwise summaries (original units).
  Eigen::VectorXd cf_mean, cf_lo, cf_median, cf_hi;          // 2.5/50/97.5%
  Eigen::VectorXd effect_mean, effect_lo, effect_median, effect_hi;
  Eigen::VectorXd cum_effect_mean, cum_effect_lo, cum_effect_median, cum_effect_hi;
  Eigen::VectorXd p_cum_negative;  // per year, P(cumulative effect < 0)
  Eigen::VectorXd inclusion_prob;
  BstsDiagnostics diagnostics;
};

// Projects each kept draw over the post window: states roll forward with the
// drawn variances, regression and observation noise are added, and the result
// is de-standardized.  `years` labels the rows of controls_post.
ImpactPosterior predict_counterfactual(const BstsFit& fit,
                                       const Eigen::VectorXd& actual_post,
                                       const Eigen::MatrixXd& controls_post,
                                       const std::vector<int>& years,
                                       std::uint64_t forecast_seed_offset = 1);

struct ImpactSummary {
  struct Row {
    int year = 0;
    double actual = 0.0;
    double cf_mean = 0.0, cf_lo = 0.0, cf_hi = 0.0;
    double effect_mean = 0.0, effect_lo = 0.0, effect_hi = 0.0;
    double cum_effect_mean = 0.0, cum_effect_lo = 0.0, cum_effect_hi = 0.0;
    double p_cum_negative = 0.0;
  };
  std::vector<Row> rows;
  double final_p_cum_negative = 0.0;
  double final_mean_gap = 0.0;  // counterfactual mean - actual at the last year
};

ImpactSummary impact_report(const ImpactPosterior& posterior);

// Quantile of a sample vector by linear interpolation (used for all interval
// summaries; exposed for tests).
double sample_quantile(const Eigen::VectorXd& sorted_values, double q);

// Effective sample size via the initial positive sequence estimator.
double effective_sample_size(const Eigen::VectorXd& chain);

}  // namespace synthcf
