#pragma once

// Synthetic control core: the nested optimization
//
//   inner:  w(v) = argmin_{w in simplex} (X1 - X0 w)' diag(v) (X1 - X0 w)
//   outer:  v*   = argmin_{v in simplex} (1/T0) || Z1 - Z0 w(v) ||^2
//
// The outer search is Nelder-Mead over a softmax parameterization of v with
// seeded multistarts (Dirichlet(1) draws plus the equal-weights start), and a
// deterministic first-found tie-break so a fixed seed yields a bit-identical
// fit.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "synthcf/panel.hpp"
#include "synthcf/simplex.hpp"

namespace synthcf {

// J donor weights on the unit simplex, aligned with a pool order.
struct DonorWeights {
  Eigen::VectorXd w;
  std::vector<std::string> donors;

  DonorWeights() = default;
  DonorWeights(Eigen::VectorXd w_, std::vector<std::string> donors_);

  double weight(const std::string& donor) const;  // 0 if absent
};

// Diagonal of V on the predictor simplex.
struct PredictorWeights {
  Eigen::VectorXd v;
  std::vector<std::string> predictors;

  PredictorWeights() = default;
  PredictorWeights(Eigen::VectorXd v_, std::vector<std::string> predictors_);
};

struct ScmProblem {
  PredictorMatrices m;
  std::string treated;
  std::string outcome;
  std::string pool_name;
  std::vector<int> years;     // full sample, ascending
  int treatment_year = 0;     // first treated year
  int pre_from = 0, pre_to = 0;
  Eigen::VectorXd y_treated;  // treated outcome over `years`
  Eigen::MatrixXd Y_donors;   // n_years x J donor outcomes over `years`

  int year_index(int year) const;
  int t0() const { return pre_to - pre_from + 1; }
};

// `last_year` caps the evaluation window (0 = panel end); used by the in-time
// placebo so that its post-placebo years never overlap the real treatment.
ScmProblem make_problem(const Panel& panel, const std::vector<PredictorSpec>& specs,
                        const DonorPoolSpec& pool, const std::string& treated,
                        const std::string& outcome, int treatment_year,
                        int pre_from, int pre_to, int last_year = 0);

struct ScmOptions {
  int multistarts = 20;       // Dirichlet(1) starts in addition to equal weights
  std::uint64_t seed = 2014;
  double nm_tol = 1e-9;
  int nm_max_iterations = 400;
  SimplexLsOptions inner;
  double sparsify_eps = 1e-8;
};

// One outer-search incumbent, kept for diagnostics and for cross-validation
// candidate sets.
struct StartIncumbent {
  int start_index = 0;
  Eigen::VectorXd v;
  Eigen::VectorXd w;
  double mspe = 0.0;  // (1/T0) ||Z1 - Z0 w||^2 on the fitting window
};

struct ScmFit {
  DonorWeights weights;
  PredictorWeights vweights;
  std::vector<int> years;
  Eigen::VectorXd synthetic;  // over `years`
  Eigen::VectorXd gap;        // actual - synthetic, over `years`
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  double objective = 0.0;  // outer MSPE at the solution
  int treatment_year = 0;
  int chosen_start = 0;
  std::uint64_t seed = 0;
  std::vector<StartIncumbent> starts;

  double gap_at(int year) const;
  double synthetic_at(int year) const;
};

// Inner problem only; v must lie on the predictor simplex.
DonorWeights solve_inner(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                         const Eigen::VectorXd& v,
                         const std::vector<std::string>& donors = {},
                         const SimplexLsOptions& opts = {});

ScmFit solve_nested(const ScmProblem& problem, const ScmOptions& opts = {});

// Root mean squared prediction error over aligned series.
double rmspe(const Eigen::VectorXd& actual, const Eigen::VectorXd& synthetic);

// Weighted combination of donor outcome paths.
Eigen::VectorXd synthetic_path(const DonorWeights& weights, const Panel& panel,
                               const std::string& variable, int year_from, int year_to);

}  // namespace synthcf
