#pragma once

// Robustness battery around a synthetic-control fit: in-time placebo,
// in-space (permutation) placebos with a pre-fit filter, RMSPE ratios,
// per-year permutation p-values, leave-one-donor-out jackknife, and
// train/validation cross-validation of the predictor weights.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthcf/panel.hpp"
#include "synthcf/scm.hpp"

namespace synthcf {

// Everything needed to re-pose the fit for a different treated unit or
// treatment year: the panel plus the configuration of the benchmark run.
struct StudySpec {
  const Panel* panel = nullptr;
  std::vector<PredictorSpec> predictors;
  DonorPoolSpec pool;
  std::string treated;
  std::string outcome;
  int treatment_year = 0;
  int pre_from = 0, pre_to = 0;
  int last_year = 0;  // caps the evaluation window, 0 = panel end
  ScmOptions scm;

  ScmProblem problem() const;
};

struct PlaceboFit {
  std::string unit;
  ScmFit fit;
  bool surviving = true;  // passed the pre-fit filter
};

struct PlaceboEnsemble {
  ScmFit treated_fit;
  std::string treated;
  std::vector<PlaceboFit> placebos;  // ordered by unit name
  double filter_multiplier = 5.0;
  double filter_threshold = 0.0;  // filter_multiplier * treated pre-RMSPE
  std::vector<int> years;
  int treatment_year = 0;

  std::vector<const PlaceboFit*> survivors() const;
  std::vector<std::string> filtered_units() const;
};

struct RatioEntry {
  std::string unit;
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  double ratio = 0.0;
  bool treated = false;
  bool surviving = true;
  bool defined = true;  // false when pre_rmspe == 0
};

struct SignificanceReport {
  std::vector<RatioEntry> ratios;  // descending by ratio, undefined last
  int treated_rank = 0;            // 1-based among surviving units
  std::vector<int> post_years;
  Eigen::VectorXd pvalues;          // per post year
  Eigen::VectorXd gap_vs_mean;      // treated gap minus mean surviving placebo gap
  int n_surviving = 0;
};

// Re-estimates with treatment reassigned to placebo_year; the fitting window
// shrinks to [pre_from, placebo_year - 1].
ScmFit in_time_placebo(const StudySpec& study, int placebo_year);

// One fit per donor (the true treated unit returns to the pool).  `jobs`
// bounds worker threads; results are merged in deterministic unit order and
// each job draws from its own seed stream.
PlaceboEnsemble in_space_placebos(const StudySpec& study, double filter_multiplier = 5.0,
                                  int jobs = 1);

// Ratio table over all ensemble units (treated included).
std::vector<RatioEntry> rmspe_ratios(const PlaceboEnsemble& ensemble);

// Ratio table + per-year permutation p-values over the post window:
// p_t = (1 + #{survivors u: |gap_u,t| >= |gap_treated,t|}) / (1 + N_surviving).
SignificanceReport significance(const PlaceboEnsemble& ensemble);

struct JackknifeRun {
  std::string dropped;
  ScmFit fit;
  double max_synthetic_deviation = 0.0;  // vs benchmark synthetic path
};

// Re-runs solve_nested once per positively weighted donor in `benchmark`.
std::vector<JackknifeRun> jackknife(const StudySpec& study, const ScmFit& benchmark,
                                    int jobs = 1, double weight_eps = 1e-6);

struct CvCandidate {
  std::string source;  // "start-<i>", "equal-weights", "benchmark-v"
  Eigen::VectorXd v;
  Eigen::VectorXd w;
  double train_rmspe = 0.0;
  double validation_rmspe = 0.0;
};

struct CvResult {
  DonorWeights weights;
  Eigen::VectorXd v;
  double validation_rmspe = 0.0;
  double benchmark_validation_rmspe = 0.0;  // benchmark weights on the same window
  int selected = 0;                         // index into candidates
  std::vector<CvCandidate> candidates;
  int train_from = 0, train_to = 0;
  int validate_from = 0, validate_to = 0;
};

// Trains the nested solver on [train_from, train_to] and selects among the
// multistart V incumbents by RMSPE over [validate_from, validate_to].  The
// windows must be disjoint, ordered, and lie at or before the treatment year.
// When `benchmark` is given, its V and weights are evaluated as an extra
// candidate and its validation RMSPE reported.
CvResult cross_validate(const StudySpec& study, int train_from, int train_to,
                        int validate_from, int validate_to,
                        const ScmFit* benchmark = nullptr);

}  // namespace synthcf
