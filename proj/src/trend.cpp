#include "synthcf/trend.hpp"

#include <cmath>

#include "synthcf/errors.hpp"

namespace synthcf {

Eigen::VectorXd potential_path(int anchor_year, double anchor_value, double growth_pct,
                               int last_year) {
  if (last_year < anchor_year) throw ValidationError("potential_path: last_year before anchor");
  if (!(anchor_value > 0.0)) throw ValidationError("potential_path: anchor must be positive");
  const int n = last_year - anchor_year + 1;
  Eigen::VectorXd out(n);
  const double g = 1.0 + growth_pct / 100.0;
  out[0] = anchor_value;
  for (int t = 1; t < n; ++t) out[t] = out[t - 1] * g;
  return out;
}

TrendDecomposition decompose_shortfall(const Eigen::VectorXd& actual,
                                       const Eigen::VectorXd& synthetic,
                                       const Eigen::VectorXd& potential,
                                       const std::vector<int>& years) {
  const auto n = actual.size();
  if (synthetic.size() != n || potential.size() != n ||
      static_cast<Eigen::Index>(years.size()) != n)
    throw ValidationError("decompose_shortfall: length mismatch");
  if (n == 0) throw ValidationError("decompose_shortfall: empty input");

  TrendDecomposition out;
  out.years.reserve(years.size());
  double internal_sum = 0.0, external_sum = 0.0, total_sum = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    YearDecomposition yd;
    yd.year = years[static_cast<std::size_t>(t)];
    yd.actual = actual[t];
    yd.synthetic = synthetic[t];
    yd.potential = potential[t];
    yd.total = yd.potential - yd.actual;
    yd.internal = yd.synthetic - yd.actual;   // gap closable by matching the donors
    yd.external = yd.potential - yd.synthetic;  // gap the donor pool shares
    // Degenerate when there is no shortfall to split, or when the synthetic
    // path lies outside [actual, potential] so a share would leave [0, 1].
    yd.degenerate = !(yd.total > 0.0) || yd.internal < 0.0 || yd.external < 0.0;
    if (yd.degenerate) {
      yd.internal_share = yd.external_share = 0.0;
      out.degenerate_years.push_back(yd.year);
    } else {
      yd.internal_share = yd.internal / yd.total;
      yd.external_share = yd.external / yd.total;
      internal_sum += yd.internal;
      external_sum += yd.external;
      total_sum += yd.total;
    }
    out.years.push_back(yd);
  }
  if (!(total_sum > 0.0))
    throw NumericalError("decompose_shortfall: no year with a positive shortfall");
  // Period shares weight each year by its shortfall, so large-gap years dominate.
  out.internal_share = internal_sum / total_sum;
  out.external_share = external_sum / total_sum;

  // Growth split over the same window; the potential growth rate is read off
  // the potential path itself.  Skipped when levels make growth undefined.
  if (n >= 2 && actual.minCoeff() > 0.0 && synthetic.minCoeff() > 0.0 &&
      potential.minCoeff() > 0.0) {
    const double span = static_cast<double>(n - 1);
    out.potential_growth =
        100.0 * (std::pow(potential[n - 1] / potential[0], 1.0 / span) - 1.0);
    const GrowthSplit g = growth_decomposition(actual, synthetic, out.potential_growth);
    out.mean_actual_growth = g.mean_actual_growth;
    out.mean_synthetic_growth = g.mean_synthetic_growth;
    out.internal_pp = g.internal_pp;
    out.external_pp = g.external_pp;
  }
  return out;
}

GrowthSplit growth_decomposition(const Eigen::VectorXd& actual, const Eigen::VectorXd& synthetic,
                                 double potential_growth_pct) {
  const auto n = actual.size();
  if (synthetic.size() != n) throw ValidationError("growth_decomposition: length mismatch");
  if (n < 2) throw ValidationError("growth_decomposition: need at least two years");
  for (Eigen::Index t = 0; t < n; ++t)
    if (!(actual[t] > 0.0) || !(synthetic[t] > 0.0))
      throw ValidationError("growth_decomposition: levels must be positive");

  GrowthSplit out;
  // Geometric mean growth over the window, in percent per year.
  const double span = static_cast<double>(n - 1);
  out.mean_actual_growth = 100.0 * (std::pow(actual[n - 1] / actual[0], 1.0 / span) - 1.0);
  out.mean_synthetic_growth =
      100.0 * (std::pow(synthetic[n - 1] / synthetic[0], 1.0 / span) - 1.0);
  out.internal_pp = out.mean_synthetic_growth - out.mean_actual_growth;
  out.external_pp = potential_growth_pct - out.mean_synthetic_growth;
  return out;
}

}  // namespace synthcf
