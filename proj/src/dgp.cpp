#include "synthcf/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "synthcf/errors.hpp"

namespace synthcf {

namespace {

std::string unit_name(const char* prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
  return buf;
}

}  // namespace

GeneratedPanel generate_panel(const DgpSpec& spec) {
  if (spec.n_donors < 3) throw ValidationError("generate_panel: need at least 3 donors");
  if (spec.n_years < 10) throw ValidationError("generate_panel: need at least 10 years");
  if (spec.noise_sd < 0.0) throw ValidationError("generate_panel: negative noise");
  const int treat_idx = spec.treatment_year - spec.first_year;
  if (treat_idx <= 1 || treat_idx >= spec.n_years)
    throw ValidationError("generate_panel: treatment year outside the sample");

  Rng rng(spec.seed);
  const int T = spec.n_years;
  const int J = spec.n_donors;
  const int M = std::max(spec.n_factors, 1);

  // Common factors: geometric growth plus a smooth AR(1) wiggle, all positive.
  Eigen::MatrixXd F(T, M);
  for (int m = 0; m < M; ++m) {
    const double drift = rng.uniform(0.015, 0.035);
    const double amp = rng.uniform(0.01, 0.03);
    double wiggle = 0.0;
    for (int t = 0; t < T; ++t) {
      wiggle = 0.75 * wiggle + amp * rng.normal();
      F(t, m) = spec.base_level * std::pow(1.0 + drift, t) * (1.0 + wiggle);
    }
  }

  // Donor loadings on the factor simplex plus a level multiplier.
  Eigen::MatrixXd loadings(J, M);
  Eigen::VectorXd mult(J);
  for (int j = 0; j < J; ++j) {
    loadings.row(j) = rng.dirichlet(M).transpose();
    mult[j] = rng.uniform(0.7, 1.3);
  }

  Eigen::MatrixXd Y(T, J);  // donor outcomes
  for (int j = 0; j < J; ++j)
    for (int t = 0; t < T; ++t) {
      const double level = mult[j] * loadings.row(j).dot(F.row(t));
      Y(t, j) = level * (1.0 + spec.noise_sd * rng.normal());
    }

  GeneratedPanel out;
  out.true_weights = spec.treated_in_hull ? rng.dirichlet(J)
                                          : Eigen::VectorXd::Zero(J);

  Eigen::VectorXd cf(T);
  if (spec.treated_in_hull) {
    cf = Y * out.true_weights;
  } else {
    const Eigen::VectorXd lam = rng.dirichlet(M);
    const double m0 = rng.uniform(0.7, 1.3);
    for (int t = 0; t < T; ++t) cf[t] = m0 * lam.dot(F.row(t));
  }
  for (int t = 0; t < T; ++t) cf[t] *= 1.0 + spec.noise_sd * rng.normal();

  out.injected_effect = Eigen::VectorXd::Zero(T);
  for (std::size_t k = 0; k < spec.effect.size(); ++k) {
    const int t = treat_idx + static_cast<int>(k);
    if (t >= T) break;
    out.injected_effect[t] = spec.effect_relative ? spec.effect[k] * cf[t] : spec.effect[k];
  }
  const Eigen::VectorXd y_treated = cf + out.injected_effect;
  out.treated_counterfactual = cf;

  // Predictors: linear reads of the loadings, constant over years, so a hull
  // treated unit automatically has the hull combination of donor predictors.
  Eigen::MatrixXd pred_dir(spec.n_predictors, M);
  for (int p = 0; p < spec.n_predictors; ++p)
    for (int m = 0; m < M; ++m) pred_dir(p, m) = rng.normal(0.0, 1.0);
  Eigen::MatrixXd donor_pred = loadings * pred_dir.transpose();  // J x P
  for (int j = 0; j < J; ++j)
    for (int p = 0; p < spec.n_predictors; ++p)
      donor_pred(j, p) += 0.01 * rng.normal();
  Eigen::VectorXd treated_pred(spec.n_predictors);
  if (spec.treated_in_hull) {
    treated_pred = donor_pred.transpose() * out.true_weights;
  } else {
    for (int p = 0; p < spec.n_predictors; ++p) treated_pred[p] = rng.normal(0.0, 1.0);
  }

  // Assemble the Panel.
  Panel& pn = out.panel;
  out.donors.clear();
  for (int j = 0; j < J; ++j) out.donors.push_back(unit_name("D", j + 1));
  pn.units = out.donors;
  pn.units.push_back(out.treated);
  std::sort(pn.units.begin(), pn.units.end());
  pn.variables.push_back(out.outcome);
  out.predictor_variables.clear();
  for (int p = 0; p < spec.n_predictors; ++p)
    out.predictor_variables.push_back(unit_name("x", p + 1));
  for (const auto& v : out.predictor_variables) pn.variables.push_back(v);
  std::sort(pn.variables.begin(), pn.variables.end());
  pn.first_year = spec.first_year;
  pn.last_year = spec.first_year + T - 1;
  pn.values.assign(pn.units.size(),
                   std::vector<std::vector<double>>(
                       pn.variables.size(),
                       std::vector<double>(T, std::numeric_limits<double>::quiet_NaN())));

  for (int t = 0; t < T; ++t) {
    const int year = spec.first_year + t;
    pn.set(out.treated, out.outcome, year, y_treated[t]);
    for (int j = 0; j < J; ++j) pn.set(out.donors[j], out.outcome, year, Y(t, j));
    for (int p = 0; p < spec.n_predictors; ++p) {
      pn.set(out.treated, out.predictor_variables[p], year, treated_pred[p]);
      for (int j = 0; j < J; ++j)
        pn.set(out.donors[j], out.predictor_variables[p], year, donor_pred(j, p));
    }
  }
  return out;
}

GridOracleResult grid_oracle(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                             const Eigen::VectorXd& v, double resolution,
                             const Eigen::VectorXd& box_lo, const Eigen::VectorXd& box_hi) {
  const int J = static_cast<int>(X0.cols());
  const int k = static_cast<int>(X0.rows());
  if (J > 6) throw ValidationError("grid_oracle: J > 6 is combinatorially infeasible");
  if (!(resolution > 0.0) || resolution > 1.0)
    throw ValidationError("grid_oracle: resolution must lie in (0, 1]");
  if (X1.size() != k || v.size() != k)
    throw ValidationError("grid_oracle: dimension mismatch");

  const int N = std::max(1, static_cast<int>(std::llround(1.0 / resolution)));
  const double step = 1.0 / N;
  const bool boxed = box_lo.size() == J && box_hi.size() == J;

  // Pre-scale by sqrt(v) so the objective is a plain squared norm.
  const Eigen::VectorXd sq = v.cwiseMax(0.0).cwiseSqrt();
  const Eigen::VectorXd b = sq.asDiagonal() * X1;
  const Eigen::MatrixXd A = sq.asDiagonal() * X0;

  GridOracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(J);
  // Residual stack: residual[d] is b - sum of chosen columns up to depth d.
  std::vector<Eigen::VectorXd> residual(J + 1, Eigen::VectorXd(k));
  residual[0] = b;

  std::function<void(int, int)> recurse = [&](int depth, int remaining) {
    if (depth == J - 1) {
      // Last coordinate is forced.
      const double w_last = remaining * step;
      if (boxed &&
          (w_last < box_lo[depth] - 0.5 * step || w_last > box_hi[depth] + 0.5 * step))
        return;
      counts[depth] = remaining;
      const double obj = (residual[depth] - w_last * A.col(depth)).squaredNorm();
      if (obj < best.objective) {
        best.objective = obj;
        best.w = counts.cast<double>() * step;
      }
      return;
    }
    int lo = 0, hi = remaining;
    if (boxed) {
      lo = std::max(lo, static_cast<int>(std::ceil((box_lo[depth] - 0.5 * step) / step)));
      hi = std::min(hi, static_cast<int>(std::floor((box_hi[depth] + 0.5 * step) / step)));
    }
    for (int n = lo; n <= hi; ++n) {
      counts[depth] = n;
      residual[depth + 1] = residual[depth] - (n * step) * A.col(depth);
      recurse(depth + 1, remaining - n);
    }
  };
  recurse(0, N);

  if (!best.w.size())
    throw NumericalError("grid_oracle: box excluded the entire lattice");
  return best;
}

GridOracleResult grid_oracle_refined(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                                     const Eigen::VectorXd& v, double coarse_resolution,
                                     double fine_resolution, double neighborhood) {
  const GridOracleResult coarse = grid_oracle(X1, X0, v, coarse_resolution);
  const int J = static_cast<int>(X0.cols());
  Eigen::VectorXd lo(J), hi(J);
  for (int j = 0; j < J; ++j) {
    lo[j] = std::max(0.0, coarse.w[j] - neighborhood);
    hi[j] = std::min(1.0, coarse.w[j] + neighborhood);
  }
  GridOracleResult fine = grid_oracle(X1, X0, v, fine_resolution, lo, hi);
  return fine.objective <= coarse.objective ? fine : coarse;
}

}  // namespace synthcf
