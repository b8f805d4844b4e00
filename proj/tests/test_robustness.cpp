#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "synthcf/dgp.hpp"
#include "synthcf/robustness.hpp"

using namespace synthcf;

namespace {

// A shared small study over a hull DGP; cached so the battery of tests pays
// for panel generation once.
struct Fixture {
  DgpSpec spec;
  GeneratedPanel g;
  StudySpec study;
  ScmFit benchmark;

  Fixture() {
    spec.n_donors = 7;
    spec.n_years = 24;
    spec.first_year = 1994;
    spec.treatment_year = 2011;
    spec.n_predictors = 2;
    spec.noise_sd = 0.02;
    spec.effect = {-0.05, -0.06, -0.07, -0.07, -0.07, -0.07, -0.07};
    spec.seed = 21;
    g = generate_panel(spec);

    study.panel = &g.panel;
    study.pool.name = "donors";
    study.pool.included = g.donors;
    study.treated = g.treated;
    study.outcome = g.outcome;
    study.treatment_year = spec.treatment_year;
    study.pre_from = spec.first_year;
    study.pre_to = spec.treatment_year - 1;
    for (const auto& x : g.predictor_variables) {
      PredictorSpec s;
      s.variable = x;
      study.predictors.push_back(s);
    }
    PredictorSpec om;
    om.variable = g.outcome;
    study.predictors.push_back(om);
    study.scm.multistarts = 2;
    study.scm.seed = 909;
    benchmark = solve_nested(study.problem(), study.scm);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("in-time placebo refits on the shortened window") {
  const Fixture& f = fixture();
  StudySpec study = f.study;
  study.last_year = f.spec.treatment_year - 1;  // never touch real post years
  const ScmFit fit = in_time_placebo(study, 2004);

  CHECK(fit.treatment_year == 2004);
  // Window: pre_from .. last_year only.
  CHECK(fit.years.front() == f.spec.first_year);
  CHECK(fit.years.back() == f.spec.treatment_year - 1);
  // No treatment happened in 2004, so the placebo "post" gap stays small
  // relative to the injected post-2011 effect (5-7% of level).
  double placebo_gap = 0.0;
  int n = 0;
  for (std::size_t t = 0; t < fit.years.size(); ++t)
    if (fit.years[t] >= 2004) {
      placebo_gap += std::abs(fit.gap[static_cast<int>(t)]);
      ++n;
    }
  placebo_gap /= n;
  double real_gap = 0.0;
  int m = 0;
  for (std::size_t t = 0; t < f.benchmark.years.size(); ++t)
    if (f.benchmark.years[t] >= f.spec.treatment_year) {
      real_gap += std::abs(f.benchmark.gap[static_cast<int>(t)]);
      ++m;
    }
  real_gap /= m;
  CHECK(placebo_gap < real_gap / 3.0);

  CHECK_THROWS_AS(in_time_placebo(study, f.spec.first_year), ValidationError);
  CHECK_THROWS_AS(in_time_placebo(study, f.spec.treatment_year), ValidationError);
}

TEST_CASE("in-space placebos cover the pool and respect the filter") {
  const Fixture& f = fixture();
  const PlaceboEnsemble ens = in_space_placebos(f.study, 5.0);

  // One placebo per pool unit, in deterministic unit order.
  REQUIRE(ens.placebos.size() == f.g.donors.size());
  std::vector<std::string> units;
  for (const auto& p : ens.placebos) units.push_back(p.unit);
  std::vector<std::string> sorted_units = units;
  std::sort(sorted_units.begin(), sorted_units.end());
  CHECK(units == sorted_units);

  CHECK(ens.filter_threshold == doctest::Approx(5.0 * ens.treated_fit.pre_rmspe));
  for (const auto& p : ens.placebos)
    CHECK(p.surviving == (p.fit.pre_rmspe <= ens.filter_threshold));

  // survivors() and filtered_units() partition the ensemble.
  CHECK(ens.survivors().size() + ens.filtered_units().size() == ens.placebos.size());
}

TEST_CASE("placebo fits put the true treated unit back into the pool") {
  const Fixture& f = fixture();
  // Rebuild one placebo fit by hand and compare paths: the donor pool for
  // placebo unit u must be (donors \ {u}) + treated, sorted by name.
  const PlaceboEnsemble ens = in_space_placebos(f.study, 5.0);
  const std::string u = f.g.donors[2];

  StudySpec manual = f.study;
  manual.treated = u;
  manual.pool.included.clear();
  for (const auto& d : f.g.donors)
    if (d != u) manual.pool.included.push_back(d);
  manual.pool.included.push_back(f.study.treated);
  std::sort(manual.pool.included.begin(), manual.pool.included.end());
  manual.scm.seed = mix_seed(f.study.scm.seed, 3);  // unit index 2 -> stream 3
  const ScmFit manual_fit = solve_nested(manual.problem(), manual.scm);

  const PlaceboFit* from_ensemble = nullptr;
  for (const auto& p : ens.placebos)
    if (p.unit == u) from_ensemble = &p;
  REQUIRE(from_ensemble != nullptr);
  CHECK(from_ensemble->fit.weights.w == manual_fit.weights.w);
  CHECK(from_ensemble->fit.synthetic == manual_fit.synthetic);
}

TEST_CASE("parallel placebo runs are independent of the thread count") {
  const Fixture& f = fixture();
  const PlaceboEnsemble a = in_space_placebos(f.study, 5.0, 1);
  const PlaceboEnsemble b = in_space_placebos(f.study, 5.0, 4);
  REQUIRE(a.placebos.size() == b.placebos.size());
  for (std::size_t i = 0; i < a.placebos.size(); ++i) {
    CHECK(a.placebos[i].unit == b.placebos[i].unit);
    CHECK(a.placebos[i].fit.weights.w == b.placebos[i].fit.weights.w);
    CHECK(a.placebos[i].fit.gap == b.placebos[i].fit.gap);
  }
}

TEST_CASE("a looser filter can only admit more placebos") {
  const Fixture& f = fixture();
  const PlaceboEnsemble tight = in_space_placebos(f.study, 2.0);
  const PlaceboEnsemble loose = in_space_placebos(f.study, 20.0);
  CHECK(tight.survivors().size() <= loose.survivors().size());
  // Every survivor of the tight filter survives the loose one.
  std::set<std::string> loose_names;
  for (const auto* p : loose.survivors()) loose_names.insert(p->unit);
  for (const auto* p : tight.survivors()) CHECK(loose_names.count(p->unit) == 1);
}

TEST_CASE("significance: ranks, p-values, and ratio ordering recomputed by hand") {
  const Fixture& f = fixture();
  const PlaceboEnsemble ens = in_space_placebos(f.study, 5.0);
  const SignificanceReport rep = significance(ens);

  // Ratios are sorted descending with undefined entries at the back.
  for (std::size_t i = 1; i < rep.ratios.size(); ++i) {
    if (rep.ratios[i].defined && rep.ratios[i - 1].defined)
      CHECK(rep.ratios[i - 1].ratio >= rep.ratios[i].ratio);
    if (!rep.ratios[i - 1].defined) CHECK(!rep.ratios[i].defined);
  }

  // Recount the treated rank among surviving, defined entries.
  double treated_ratio = 0.0;
  for (const auto& r : rep.ratios)
    if (r.treated) treated_ratio = r.ratio;
  int rank = 1;
  int n_surviving = 0;
  for (const auto& r : rep.ratios) {
    if (r.treated || !r.surviving || !r.defined) continue;
    ++n_surviving;
    if (r.ratio > treated_ratio) ++rank;
  }
  CHECK(rep.treated_rank == rank);
  CHECK(rep.n_surviving == n_surviving);

  // Recompute the add-one permutation p-value for each post year.
  REQUIRE(rep.post_years.front() == f.spec.treatment_year);
  for (std::size_t k = 0; k < rep.post_years.size(); ++k) {
    const int year = rep.post_years[k];
    const double treated_gap = std::abs(ens.treated_fit.gap_at(year));
    int count = 0, n = 0;
    for (const auto& p : ens.placebos) {
      if (!p.surviving) continue;
      ++n;
      if (std::abs(p.fit.gap_at(year)) >= treated_gap) ++count;
    }
    CHECK(rep.pvalues[static_cast<int>(k)] ==
          doctest::Approx((1.0 + count) / (1.0 + n)).epsilon(1e-12));
  }
  CHECK(rep.pvalues.minCoeff() > 0.0);
  CHECK(rep.pvalues.maxCoeff() <= 1.0);

  // With a strong injected effect the treated unit should lead the ranking.
  CHECK(rep.treated_rank == 1);
}

TEST_CASE("jackknife drops exactly the positively weighted donors") {
  const Fixture& f = fixture();
  const std::vector<JackknifeRun> runs = jackknife(f.study, f.benchmark, 2);

  std::set<std::string> expected;
  for (int j = 0; j < f.benchmark.weights.w.size(); ++j)
    if (f.benchmark.weights.w[j] > 1e-6) expected.insert(f.benchmark.weights.donors[j]);
  REQUIRE(runs.size() == expected.size());
  for (const auto& r : runs) {
    CHECK(expected.count(r.dropped) == 1);
    // The dropped donor is gone from the refit's pool.
    CHECK(r.fit.weights.weight(r.dropped) == 0.0);
    CHECK(std::find(r.fit.weights.donors.begin(), r.fit.weights.donors.end(),
                    r.dropped) == r.fit.weights.donors.end());
    // Deviation matches a direct recomputation.
    const double dev = (r.fit.synthetic - f.benchmark.synthetic).lpNorm<Eigen::Infinity>();
    CHECK(r.max_synthetic_deviation == doctest::Approx(dev));
  }

  // Deterministic across thread counts.
  const std::vector<JackknifeRun> serial = jackknife(f.study, f.benchmark, 1);
  REQUIRE(serial.size() == runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(serial[i].dropped == runs[i].dropped);
    CHECK(serial[i].fit.weights.w == runs[i].fit.weights.w);
  }
}

TEST_CASE("cross-validation: candidates, selection, and windows") {
  const Fixture& f = fixture();
  const CvResult cv =
      cross_validate(f.study, f.spec.first_year, 2002, 2003, f.spec.treatment_year - 1,
                     &f.benchmark);

  // Candidate set: one per train-window start, plus equal-weights and the
  // benchmark V.
  CHECK(cv.candidates.size() == static_cast<std::size_t>(f.study.scm.multistarts) + 3);
  int n_equal = 0, n_bench = 0;
  for (const auto& c : cv.candidates) {
    if (c.source == "equal-weights") ++n_equal;
    if (c.source == "benchmark-v") ++n_bench;
    CHECK(c.v.minCoeff() >= 0.0);
    CHECK(c.v.sum() == doctest::Approx(1.0));
    CHECK(c.w.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.validation_rmspe >= 0.0);
  }
  CHECK(n_equal == 1);
  CHECK(n_bench == 1);

  // Selection is the strict argmin over validation RMSPE (first on ties).
  int best = 0;
  for (int i = 1; i < static_cast<int>(cv.candidates.size()); ++i)
    if (cv.candidates[static_cast<std::size_t>(i)].validation_rmspe <
        cv.candidates[static_cast<std::size_t>(best)].validation_rmspe)
      best = i;
  CHECK(cv.selected == best);
  CHECK(cv.validation_rmspe ==
        doctest::Approx(cv.candidates[static_cast<std::size_t>(best)].validation_rmspe));

  // The selected weights can never validate worse than the benchmark-v
  // candidate (the merit of the benchmark's own full-window weights is a
  // separate number: those weights saw the validation years when fit).
  for (const auto& c : cv.candidates)
    if (c.source == "benchmark-v") CHECK(cv.validation_rmspe <= c.validation_rmspe + 1e-12);
  CHECK(cv.train_from == f.spec.first_year);
  CHECK(cv.validate_to == f.spec.treatment_year - 1);

  // Benchmark validation RMSPE recomputed by hand from the benchmark weights.
  Eigen::VectorXd w_bench(f.g.donors.size());
  for (std::size_t j = 0; j < f.g.donors.size(); ++j)
    w_bench[static_cast<int>(j)] = f.benchmark.weights.weight(f.g.donors[j]);
  double sse = 0.0;
  int n = 0;
  for (int year = 2003; year <= f.spec.treatment_year - 1; ++year) {
    double synth = 0.0;
    for (std::size_t j = 0; j < f.g.donors.size(); ++j)
      synth += w_bench[static_cast<int>(j)] *
               f.g.panel.value(f.g.donors[j], f.g.outcome, year);
    const double gap = f.g.panel.value(f.g.treated, f.g.outcome, year) - synth;
    sse += gap * gap;
    ++n;
  }
  CHECK(cv.benchmark_validation_rmspe == doctest::Approx(std::sqrt(sse / n)).epsilon(1e-10));
}

TEST_CASE("cross-validation window validation") {
  const Fixture& f = fixture();
  // Overlapping windows.
  CHECK_THROWS_AS(cross_validate(f.study, 1994, 2003, 2003, 2010), ValidationError);
  // Reversed order.
  CHECK_THROWS_AS(cross_validate(f.study, 2003, 1994, 2004, 2010), ValidationError);
  // Validation window past the treatment year.
  CHECK_THROWS_AS(cross_validate(f.study, 1994, 2002, 2003, 2015), ValidationError);
}

TEST_CASE("study problem honors the evaluation cap") {
  const Fixture& f = fixture();
  StudySpec capped = f.study;
  capped.last_year = 2013;
  const ScmProblem p = capped.problem();
  CHECK(p.years.back() == 2013);
}
