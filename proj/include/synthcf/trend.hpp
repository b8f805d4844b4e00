#pragma once

// Trend extraction and shortfall decomposition: HP-filtered trends, the
// geometric potential-output benchmark, and the split of the post-treatment
// shortfall into an internal component (synthetic - actual) and an external
// component (potential - synthetic), in levels and in growth rates.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "synthcf/hp_filter.hpp"

namespace synthcf {

// Geometric extrapolation v_t = anchor_value * (1+g)^(t - anchor_year) for
// t in [anchor_year, last_year]; growth_pct in percent.
Eigen::VectorXd potential_path(int anchor_year, double anchor_value, double growth_pct,
                               int last_year);

struct YearDecomposition {
  int year = 0;
  double actual = 0.0, synthetic = 0.0, potential = 0.0;
  double total = 0.0;     // potential - actual
  double internal = 0.0;  // synthetic - actual
  double external = 0.0;  // potential - synthetic
  double internal_share = 0.0, external_share = 0.0;
  bool degenerate = false;  // total <= 0, or a share outside [0,1]
};

struct TrendDecomposition {
  std::vector<YearDecomposition> years;
  // Shortfall-weighted period averages over non-degenerate years.
  double internal_share = 0.0;
  double external_share = 0.0;
  std::vector<int> degenerate_years;
  // Growth split over the window (first year is the growth base).
  double mean_actual_growth = 0.0;     // percent per year
  double mean_synthetic_growth = 0.0;  // percent per year
  double potential_growth = 0.0;       // percent per year (input)
  double internal_pp = 0.0;            // mean synthetic growth - mean actual growth
  double external_pp = 0.0;            // potential growth - mean synthetic growth
};

// Per-year decomposition over `years` (ascending, same length as the series);
// the first entry is the treatment year.  Throws NumericalError if the total
// shortfall is <= 0 in every year.
TrendDecomposition decompose_shortfall(const Eigen::VectorXd& actual,
                                       const Eigen::VectorXd& synthetic,
                                       const Eigen::VectorXd& potential,
                                       const std::vector<int>& years);

struct GrowthSplit {
  double internal_pp = 0.0;
  double external_pp = 0.0;
  double mean_actual_growth = 0.0;
  double mean_synthetic_growth = 0.0;
};

// Growth decomposition over a window whose first value is the growth base:
// internal pp = mean synthetic growth - mean actual growth, external pp =
// potential_growth - mean synthetic growth.  Growth rates in percent.
GrowthSplit growth_decomposition(const Eigen::VectorXd& actual,
                                 const Eigen::VectorXd& synthetic,
                                 double potential_growth_pct);

}  // namespace synthcf
