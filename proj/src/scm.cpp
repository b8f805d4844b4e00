#include "synthcf/scm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synthcf/errors.hpp"
#include "synthcf/nelder_mead.hpp"
#include "synthcf/rng.hpp"

namespace synthcf {

namespace {

void check_simplex(const Eigen::VectorXd& x, const char* what) {
  if (x.size() == 0) throw ValidationError(std::string(what) + ": empty weight vector");
  if (!x.allFinite()) throw ValidationError(std::string(what) + ": non-finite weights");
  if ((x.array() < -1e-10).any())
    throw ValidationError(std::string(what) + ": negative weight");
  if (std::abs(x.sum() - 1.0) > 1e-8)
    throw ValidationError(std::string(what) + ": weights must sum to 1");
}

// Softmax with a pinned last coordinate: x in R^{k-1} -> v on the k-simplex.
Eigen::VectorXd softmax_pinned(const Eigen::VectorXd& x) {
  const int k = static_cast<int>(x.size()) + 1;
  Eigen::VectorXd e(k);
  double mx = 0.0;  // the pinned logit
  for (int i = 0; i < k - 1; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double logit = (i < k - 1) ? x[i] : 0.0;
    e[i] = std::exp(logit - mx);
    sum += e[i];
  }
  return e / sum;
}

Eigen::VectorXd logits_from_v(const Eigen::VectorXd& v) {
  const int k = static_cast<int>(v.size());
  Eigen::VectorXd x(k - 1);
  const double ref = std::log(std::max(v[k - 1], 1e-12));
  for (int i = 0; i < k - 1; ++i) x[i] = std::log(std::max(v[i], 1e-12)) - ref;
  return x;
}

}  // namespace

DonorWeights::DonorWeights(Eigen::VectorXd w_, std::vector<std::string> donors_)
    : w(std::move(w_)), donors(std::move(donors_)) {
  check_simplex(w, "DonorWeights");
  if (!donors.empty() && static_cast<int>(donors.size()) != w.size())
    throw ValidationError("DonorWeights: donor list size mismatch");
  w = w.cwiseMax(0.0);  // clear round-off negatives validated above
}

double DonorWeights::weight(const std::string& donor) const {
  for (std::size_t j = 0; j < donors.size(); ++j)
    if (donors[j] == donor) return w[static_cast<int>(j)];
  return 0.0;
}

PredictorWeights::PredictorWeights(Eigen::VectorXd v_, std::vector<std::string> predictors_)
    : v(std::move(v_)), predictors(std::move(predictors_)) {
  check_simplex(v, "PredictorWeights");
  if (!predictors.empty() && static_cast<int>(predictors.size()) != v.size())
    throw ValidationError("PredictorWeights: predictor list size mismatch");
  v = v.cwiseMax(0.0);
}

int ScmProblem::year_index(int year) const {
  for (std::size_t i = 0; i < years.size(); ++i)
    if (years[i] == year) return static_cast<int>(i);
  return -1;
}

ScmProblem make_problem(const Panel& panel, const std::vector<PredictorSpec>& specs,
                        const DonorPoolSpec& pool, const std::string& treated,
                        const std::string& outcome, int treatment_year,
                        int pre_from, int pre_to, int last_year) {
  if (pre_to != treatment_year - 1)
    throw ValidationError("pre-treatment window must end the year before treatment");
  if (last_year == 0) last_year = panel.last_year;
  if (last_year < treatment_year || last_year > panel.last_year)
    throw ValidationError("make_problem: invalid last_year");
  ScmProblem p;
  p.m = build_predictor_matrix(panel, specs, pool, treated, outcome, pre_from, pre_to);
  p.treated = treated;
  p.outcome = outcome;
  p.pool_name = pool.name;
  p.treatment_year = treatment_year;
  p.pre_from = pre_from;
  p.pre_to = pre_to;
  for (int y = pre_from; y <= last_year; ++y) p.years.push_back(y);
  p.y_treated = panel.series(treated, outcome, pre_from, last_year);
  const int J = static_cast<int>(p.m.donors.size());
  p.Y_donors.resize(p.years.size(), J);
  for (int j = 0; j < J; ++j)
    p.Y_donors.col(j) = panel.series(p.m.donors[j], outcome, pre_from, last_year);
  return p;
}

DonorWeights solve_inner(const Eigen::VectorXd& X1, const Eigen::MatrixXd& X0,
                         const Eigen::VectorXd& v, const std::vector<std::string>& donors,
                         const SimplexLsOptions& opts) {
  if (X0.cols() < 1) throw ValidationError("solve_inner: need at least one donor");
  if (X0.rows() != X1.size() || v.size() != X1.size())
    throw ValidationError("solve_inner: dimension mismatch");
  if (!X1.allFinite() || !X0.allFinite() || !v.allFinite())
    throw ValidationError("solve_inner: non-finite inputs");
  check_simplex(v, "solve_inner v");

  const SimplexLsResult r = solve_simplex_ls(X0, X1, v, opts);
  if (!r.converged)
    throw NumericalError("solve_inner: projected gradient + Frank-Wolfe failed to certify "
                         "optimality (gap " + std::to_string(r.gap) + ")");
  return DonorWeights(r.w, donors);
}

double rmspe(const Eigen::VectorXd& actual, const Eigen::VectorXd& synthetic) {
  if (actual.size() == 0) throw ValidationError("rmspe: empty window");
  if (actual.size() != synthetic.size()) throw ValidationError("rmspe: length mismatch");
  return std::sqrt((actual - synthetic).squaredNorm() / actual.size());
}

Eigen::VectorXd synthetic_path(const DonorWeights& weights, const Panel& panel,
                               const std::string& variable, int year_from, int year_to) {
  if (weights.donors.empty())
    throw ValidationError("synthetic_path: weights carry no donor list");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(year_to - year_from + 1);
  for (std::size_t j = 0; j < weights.donors.size(); ++j)
    out += weights.w[static_cast<int>(j)] *
           panel.series(weights.donors[j], variable, year_from, year_to);
  return out;
}

ScmFit solve_nested(const ScmProblem& problem, const ScmOptions& opts) {
  const int k = static_cast<int>(problem.m.X1.size());
  const int T0 = problem.t0();
  if (problem.m.Z1.size() != T0)
    throw ValidationError("solve_nested: Z window does not match the pre-treatment window");

  const Eigen::MatrixXd& X0 = problem.m.X0;
  const Eigen::VectorXd& X1 = problem.m.X1;
  const Eigen::MatrixXd& Z0 = problem.m.Z0;
  const Eigen::VectorXd& Z1 = problem.m.Z1;

  auto inner_w = [&](const Eigen::VectorXd& v) {
    return solve_simplex_ls(X0, X1, v, opts.inner).w;
  };
  auto mspe_of = [&](const Eigen::VectorXd& w) {
    return (Z1 - Z0 * w).squaredNorm() / T0;
  };

  const int n_starts = std::max(opts.multistarts, 1) + 1;  // + equal-weights start
  std::vector<StartIncumbent> incumbents;
  incumbents.reserve(n_starts);

  NelderMeadOptions nm;
  nm.f_tol = opts.nm_tol;
  nm.x_tol = 1e-7;
  nm.max_iterations = opts.nm_max_iterations;
  nm.initial_step = 0.35;

  bool any_converged = false;
  for (int s = 0; s < n_starts; ++s) {
    Eigen::VectorXd v0;
    if (s == 0) {
      v0 = Eigen::VectorXd::Constant(k, 1.0 / k);
    } else {
      Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(s)));
      v0 = rng.dirichlet(k);
    }

    StartIncumbent inc;
    inc.start_index = s;
    if (k == 1) {
      inc.v = Eigen::VectorXd::Ones(1);
      inc.w = inner_w(inc.v);
      inc.mspe = mspe_of(inc.w);
      any_converged = true;
      incumbents.push_back(std::move(inc));
      continue;
    }

    auto objective = [&](const Eigen::VectorXd& x) {
      return mspe_of(inner_w(softmax_pinned(x)));
    };
    const NelderMeadResult r = nelder_mead(objective, logits_from_v(v0), nm);
    any_converged = any_converged || r.converged;
    inc.v = softmax_pinned(r.x);
    inc.w = inner_w(inc.v);
    inc.mspe = mspe_of(inc.w);
    incumbents.push_back(std::move(inc));
  }

  // Deterministic selection: strictly better MSPE wins; ties within tolerance
  // keep the earliest start.
  int best = 0;
  for (int s = 1; s < n_starts; ++s) {
    const double tol = 1e-9 * std::max(1.0, std::abs(incumbents[best].mspe));
    if (incumbents[s].mspe < incumbents[best].mspe - tol) best = s;
  }
  if (!any_converged)
    throw NumericalError(
        "solve_nested: no multistart converged; best incumbent MSPE " +
        std::to_string(incumbents[best].mspe));

  ScmFit fit;
  fit.seed = opts.seed;
  fit.chosen_start = best;
  fit.starts = incumbents;
  fit.treatment_year = problem.treatment_year;
  fit.years = problem.years;

  // Polish the winning v with a tighter inner solve, then freeze weights.
  SimplexLsOptions tight = opts.inner;
  tight.tol = std::min(opts.inner.tol, 1e-13);
  const Eigen::VectorXd v_best = incumbents[best].v;
  const SimplexLsResult inner = solve_simplex_ls(X0, X1, v_best, tight);
  const Eigen::VectorXd w = sparsify_weights(inner.w, opts.sparsify_eps);

  fit.weights = DonorWeights(w, problem.m.donors);
  fit.vweights = PredictorWeights(v_best, problem.m.predictor_names);
  fit.objective = mspe_of(w);
  fit.synthetic = problem.Y_donors * w;
  fit.gap = problem.y_treated - fit.synthetic;

  const int i_pre_from = problem.year_index(problem.pre_from);
  const int i_pre_to = problem.year_index(problem.pre_to);
  const int i_treat = problem.year_index(problem.treatment_year);
  if (i_pre_from < 0 || i_pre_to < 0)
    throw ValidationError("solve_nested: pre-treatment window outside panel years");
  fit.pre_rmspe = std::sqrt(
      fit.gap.segment(i_pre_from, i_pre_to - i_pre_from + 1).squaredNorm() /
      (i_pre_to - i_pre_from + 1));
  if (i_treat >= 0) {
    const int n_post = static_cast<int>(fit.gap.size()) - i_treat;
    fit.post_rmspe = std::sqrt(fit.gap.tail(n_post).squaredNorm() / n_post);
  }
  return fit;
}

double ScmFit::gap_at(int year) const {
  for (std::size_t i = 0; i < years.size(); ++i)
    if (years[i] == year) return gap[static_cast<int>(i)];
  throw ValidationError("gap_at: year " + std::to_string(year) + " not in fit");
}

double ScmFit::synthetic_at(int year) const {
  for (std::size_t i = 0; i < years.size(); ++i)
    if (years[i] == year) return synthetic[static_cast<int>(i)];
  throw ValidationError("synthetic_at: year " + std::to_string(year) + " not in fit");
}

}  // namespace synthcf
