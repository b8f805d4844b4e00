#include "synthcf/robustness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "synthcf/errors.hpp"
#include "synthcf/rng.hpp"

namespace synthcf {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads.  Work items are claimed
// through an atomic counter and write to caller-owned slots, so the result is
// independent of the thread count; the first exception is rethrown.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double rmspe_over(const Eigen::VectorXd& gap, int from, int to) {
  double s = 0.0;
  for (int t = from; t <= to; ++t) s += gap[t] * gap[t];
  return std::sqrt(s / (to - from + 1));
}

}  // namespace

ScmProblem StudySpec::problem() const {
  if (!panel) throw ValidationError("study: panel not set");
  return make_problem(*panel, predictors, pool, treated, outcome, treatment_year, pre_from,
                      pre_to, last_year);
}

std::vector<const PlaceboFit*> PlaceboEnsemble::survivors() const {
  std::vector<const PlaceboFit*> out;
  for (const auto& p : placebos)
    if (p.surviving) out.push_back(&p);
  return out;
}

std::vector<std::string> PlaceboEnsemble::filtered_units() const {
  std::vector<std::string> out;
  for (const auto& p : placebos)
    if (!p.surviving) out.push_back(p.unit);
  return out;
}

ScmFit in_time_placebo(const StudySpec& study, int placebo_year) {
  if (placebo_year >= study.treatment_year)
    throw ValidationError("in-time placebo year must precede the treatment year");
  if (placebo_year - study.pre_from < 2)
    throw ValidationError("in-time placebo leaves fewer than two pre-treatment years");

  // Predictor aggregation years outside the shrunk window fall back to the
  // window mean rather than reaching into post-placebo data.
  std::vector<PredictorSpec> specs = study.predictors;
  for (auto& s : specs) {
    std::erase_if(s.at_years, [&](int y) { return y > placebo_year - 1; });
  }
  const ScmProblem problem =
      make_problem(*study.panel, specs, study.pool, study.treated, study.outcome, placebo_year,
                   study.pre_from, placebo_year - 1,
                   /*last_year=*/study.treatment_year - 1);
  return solve_nested(problem, study.scm);
}

PlaceboEnsemble in_space_placebos(const StudySpec& study, double filter_multiplier, int jobs) {
  if (!(filter_multiplier > 0.0))
    throw ValidationError("placebo filter multiplier must be positive");

  PlaceboEnsemble out;
  out.treated = study.treated;
  out.filter_multiplier = filter_multiplier;
  out.treated_fit = solve_nested(study.problem(), study.scm);
  out.years = out.treated_fit.years;
  out.treatment_year = study.treatment_year;
  out.filter_threshold = filter_multiplier * out.treated_fit.pre_rmspe;

  // Treatment is reassigned to each donor in turn; the true treated unit
  // returns to the pool so every placebo faces an equally rich donor set.
  const std::vector<std::string> units = study.pool.included;
  out.placebos.resize(units.size());

  parallel_for(static_cast<int>(units.size()), jobs, [&](int i) {
    StudySpec s = study;
    s.treated = units[static_cast<std::size_t>(i)];
    s.pool.included.clear();
    for (const auto& u : units)
      if (u != s.treated) s.pool.included.push_back(u);
    s.pool.included.push_back(study.treated);
    std::sort(s.pool.included.begin(), s.pool.included.end());
    // Every placebo unit gets its own deterministic seed stream, so results
    // do not depend on the thread count or on which units run first.
    s.scm.seed = mix_seed(study.scm.seed, static_cast<std::uint64_t>(i) + 1);

    PlaceboFit pf;
    pf.unit = s.treated;
    pf.fit = solve_nested(s.problem(), s.scm);
    out.placebos[static_cast<std::size_t>(i)] = std::move(pf);
  });

  for (auto& p : out.placebos)
    p.surviving = p.fit.pre_rmspe <= out.filter_threshold;
  return out;
}

std::vector<RatioEntry> rmspe_ratios(const PlaceboEnsemble& ensemble) {
  std::vector<RatioEntry> out;
  auto push = [&](const std::string& unit, const ScmFit& fit, bool treated, bool surviving) {
    RatioEntry e;
    e.unit = unit;
    e.pre_rmspe = fit.pre_rmspe;
    e.post_rmspe = fit.post_rmspe;
    e.treated = treated;
    e.surviving = surviving;
    e.defined = fit.pre_rmspe > 0.0;
    e.ratio = e.defined ? fit.post_rmspe / fit.pre_rmspe : 0.0;
    out.push_back(std::move(e));
  };
  push(ensemble.treated, ensemble.treated_fit, true, true);
  for (const auto& p : ensemble.placebos) push(p.unit, p.fit, false, p.surviving);
  return out;
}

SignificanceReport significance(const PlaceboEnsemble& ensemble) {
  SignificanceReport rep;
  rep.ratios = rmspe_ratios(ensemble);
  // Descending by ratio; undefined ratios sink to the bottom.  stable_sort
  // keeps the unit order (treated first, then unit name) among exact ties.
  std::stable_sort(rep.ratios.begin(), rep.ratios.end(),
                   [](const RatioEntry& a, const RatioEntry& b) {
                     if (a.defined != b.defined) return a.defined;
                     return a.ratio > b.ratio;
                   });

  const auto survivors = ensemble.survivors();
  rep.n_surviving = static_cast<int>(survivors.size());

  double treated_ratio = 0.0;
  bool treated_defined = false;
  for (const auto& e : rep.ratios)
    if (e.treated) {
      treated_ratio = e.ratio;
      treated_defined = e.defined;
    }
  rep.treated_rank = 1;
  for (const auto& e : rep.ratios)
    if (!e.treated && e.surviving && e.defined &&
        (e.ratio > treated_ratio || !treated_defined))
      ++rep.treated_rank;

  const auto& years = ensemble.years;
  const int t_treat = ensemble.treated_fit.treatment_year;
  for (std::size_t t = 0; t < years.size(); ++t)
    if (years[t] >= t_treat) rep.post_years.push_back(years[t]);

  const int n_post = static_cast<int>(rep.post_years.size());
  rep.pvalues.resize(n_post);
  rep.gap_vs_mean.resize(n_post);
  for (int i = 0; i < n_post; ++i) {
    const int year = rep.post_years[static_cast<std::size_t>(i)];
    const double g_treated = std::abs(ensemble.treated_fit.gap_at(year));
    int at_least = 0;
    double mean_gap = 0.0;
    for (const auto* p : survivors) {
      const double g = p->fit.gap_at(year);
      if (std::abs(g) >= g_treated) ++at_least;
      mean_gap += g;
    }
    if (!survivors.empty()) mean_gap /= static_cast<double>(survivors.size());
    rep.pvalues[i] =
        (1.0 + at_least) / (1.0 + static_cast<double>(survivors.size()));
    rep.gap_vs_mean[i] = ensemble.treated_fit.gap_at(year) - mean_gap;
  }
  return rep;
}

std::vector<JackknifeRun> jackknife(const StudySpec& study, const ScmFit& benchmark, int jobs,
                                    double weight_eps) {
  std::vector<std::string> dropped;
  for (std::size_t j = 0; j < benchmark.weights.donors.size(); ++j)
    if (benchmark.weights.w[static_cast<Eigen::Index>(j)] > weight_eps)
      dropped.push_back(benchmark.weights.donors[j]);
  if (dropped.empty()) throw ValidationError("jackknife: benchmark has no positive weights");

  std::vector<JackknifeRun> out(dropped.size());
  parallel_for(static_cast<int>(dropped.size()), jobs, [&](int i) {
    StudySpec s = study;
    auto& inc = s.pool.included;
    inc.erase(std::remove(inc.begin(), inc.end(), dropped[static_cast<std::size_t>(i)]),
              inc.end());
    s.scm.seed = mix_seed(study.scm.seed, 0x4a63u + static_cast<std::uint64_t>(i));

    JackknifeRun run;
    run.dropped = dropped[static_cast<std::size_t>(i)];
    run.fit = solve_nested(s.problem(), s.scm);
    run.max_synthetic_deviation =
        (run.fit.synthetic - benchmark.synthetic).cwiseAbs().maxCoeff();
    out[static_cast<std::size_t>(i)] = std::move(run);
  });
  return out;
}

CvResult cross_validate(const StudySpec& study, int train_from, int train_to, int validate_from,
                        int validate_to, const ScmFit* benchmark) {
  if (!(train_from <= train_to && train_to < validate_from && validate_from <= validate_to))
    throw ValidationError("cross-validation windows must be disjoint and ordered");
  if (validate_to > study.treatment_year)
    throw ValidationError("cross-validation windows must end by the treatment year");

  // Pose the training window as its own fitting problem: predictors aggregate
  // over [train_from, train_to] and the outcome path extends through the
  // validation window for scoring.
  std::vector<PredictorSpec> specs = study.predictors;
  for (auto& s : specs) std::erase_if(s.at_years, [&](int y) { return y > train_to; });
  const ScmProblem problem =
      make_problem(*study.panel, specs, study.pool, study.treated, study.outcome,
                   /*treatment_year=*/train_to + 1, train_from, train_to,
                   /*last_year=*/validate_to);
  const ScmFit train_fit = solve_nested(problem, study.scm);

  const int v_from = problem.year_index(validate_from);
  const int v_to = problem.year_index(validate_to);
  const int t_from = problem.year_index(train_from);
  const int t_to = problem.year_index(train_to);

  auto score = [&](const Eigen::VectorXd& w, CvCandidate& c) {
    const Eigen::VectorXd synth = problem.Y_donors * w;
    const Eigen::VectorXd gap = problem.y_treated - synth;
    c.train_rmspe = rmspe_over(gap, t_from, t_to);
    c.validation_rmspe = rmspe_over(gap, v_from, v_to);
  };

  CvResult res;
  res.train_from = train_from;
  res.train_to = train_to;
  res.validate_from = validate_from;
  res.validate_to = validate_to;

  // Candidate set: the incumbent (v, w) of every outer multistart, a fixed
  // equal-predictor-weights solve, and optionally the benchmark's V refit on
  // the training window.
  for (const auto& inc : train_fit.starts) {
    CvCandidate c;
    c.source = "start-" + std::to_string(inc.start_index);
    c.v = inc.v;
    c.w = inc.w;
    score(c.w, c);
    res.candidates.push_back(std::move(c));
  }
  {
    CvCandidate c;
    c.source = "equal-weights";
    c.v = Eigen::VectorXd::Constant(problem.m.X1.size(),
                                    1.0 / static_cast<double>(problem.m.X1.size()));
    c.w = solve_inner(problem.m.X1, problem.m.X0, c.v, problem.m.donors, study.scm.inner).w;
    score(c.w, c);
    res.candidates.push_back(std::move(c));
  }
  if (benchmark) {
    CvCandidate c;
    c.source = "benchmark-v";
    c.v = benchmark->vweights.v;
    c.w = solve_inner(problem.m.X1, problem.m.X0, c.v, problem.m.donors, study.scm.inner).w;
    score(c.w, c);
    res.candidates.push_back(std::move(c));

    // The benchmark's own donor weights, scored on the validation window.
    Eigen::VectorXd wb = Eigen::VectorXd::Zero(problem.Y_donors.cols());
    for (std::size_t j = 0; j < problem.m.donors.size(); ++j)
      wb[static_cast<Eigen::Index>(j)] = benchmark->weights.weight(problem.m.donors[j]);
    const Eigen::VectorXd gap = problem.y_treated - problem.Y_donors * wb;
    res.benchmark_validation_rmspe = rmspe_over(gap, v_from, v_to);
  }

  res.selected = 0;
  for (std::size_t i = 1; i < res.candidates.size(); ++i)
    if (res.candidates[i].validation_rmspe <
        res.candidates[static_cast<std::size_t>(res.selected)].validation_rmspe)
      res.selected = static_cast<int>(i);

  const auto& chosen = res.candidates[static_cast<std::size_t>(res.selected)];
  res.weights = DonorWeights(chosen.w, problem.m.donors);
  res.v = chosen.v;
  res.validation_rmspe = chosen.validation_rmspe;
  return res;
}

}  // namespace synthcf
