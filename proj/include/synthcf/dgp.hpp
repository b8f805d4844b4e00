#pragma once

// Benchmark oracle: synthetic panels with a known factor data-generating
// process and injected treatment effects, plus the brute-force simplex grid
// search used as the inner-solver optimality oracle.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "synthcf/panel.hpp"
#include "synthcf/rng.hpp"

namespace synthcf {

struct DgpSpec {
  int n_donors = 8;
  int first_year = 1990;
  int n_years = 30;
  int treatment_year = 2014;
  int n_factors = 2;
  int n_predictors = 3;      // outcome pre-mean is always included as one more
  double noise_sd = 0.02;    // idiosyncratic noise, relative to level
  double base_level = 100.0;
  // Additive effect on the treated unit per post-treatment year offset
  // (entry 0 applies at treatment_year).  Values are relative to level when
  // `effect_relative`, else absolute.
  std::vector<double> effect;
  bool effect_relative = true;
  // Treated loadings: convex combination of donor loadings when true (makes
  // the SCM "truth" well defined); otherwise independent random loadings.
  bool treated_in_hull = true;
  std::uint64_t seed = 1;
};

struct GeneratedPanel {
  Panel panel;
  std::string treated = "T00";
  std::vector<std::string> donors;
  std::string outcome = "outcome";
  std::vector<std::string> predictor_variables;
  Eigen::VectorXd treated_counterfactual;  // treated path with no effect applied
  Eigen::VectorXd injected_effect;         // per year, 0 before treatment
  Eigen::VectorXd true_weights;            // hull combination when treated_in_hull
};

GeneratedPanel generate_panel(const DgpSpec& spec);

struct GridOracleResult {
  Eigen::VectorXd w;
  double objective = 0.0;
};

// Exhaustive lattice search over {w : w_i = n_i * resolution, sum = 1},
// optionally restricted to a coordinate box (used for two-stage refinement).
// J <= 6 guard: the lattice grows combinatorially.
GridOracleResult grid_oracle(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                             const Eigen::VectorXd& v, double resolution,
                             const Eigen::VectorXd& box_lo = Eigen::VectorXd(),
                             const Eigen::VectorXd& box_hi = Eigen::VectorXd());

// Coarse exhaustive pass followed by an exhaustive fine pass restricted to a
// neighborhood of the coarse argmin; valid as an optimality oracle because
// the objective is convex.
GridOracleResult grid_oracle_refined(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                                     const Eigen::VectorXd& v, double coarse_resolution,
                                     double fine_resolution, double neighborhood);

}  // namespace synthcf
