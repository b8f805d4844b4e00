#include "synthcf/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "synthcf/bsts.hpp"
#include "synthcf/dgp.hpp"
#include "synthcf/hp_filter.hpp"
#include "synthcf/svg.hpp"
#include "synthcf/trend.hpp"

namespace synthcf {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Shortest round-trip decimal form; the same value always prints the same
// bytes, which keeps artifacts reproducible.
std::string fmtd(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open '" + path.string() + "' for writing");
  f << content;
  if (!f) throw ValidationError("failed writing '" + path.string() + "'");
}

SchemaMapping load_schema(const std::string& path) {
  SchemaMapping schema;
  if (path.empty()) return schema;
  std::ifstream f(path);
  if (!f) throw ValidationError("schema: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema: '" + path + "' is not valid JSON: " + e.what());
  }
  schema.unit = j.value("unit", schema.unit);
  schema.variable = j.value("variable", schema.variable);
  schema.year = j.value("year", schema.year);
  schema.value = j.value("value", schema.value);
  return schema;
}

Panel load_input_panel(const RunConfig& cfg) {
  return load_panel(cfg.panel_path, load_schema(cfg.schema_path));
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ValidationError("cannot create output directory '" + out.string() + "'");
  return out;
}

json config_block(const RunConfig& cfg) { return json::parse(run_config_to_json(cfg)); }

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> years_as_double(const std::vector<int>& years) {
  std::vector<double> out(years.size());
  for (std::size_t i = 0; i < years.size(); ++i) out[i] = years[i];
  return out;
}

// Weighted donors, heaviest first, name as the tie-break.
std::vector<std::pair<std::string, double>> sorted_weights(const DonorWeights& w) {
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t j = 0; j < w.donors.size(); ++j)
    rows.emplace_back(w.donors[j], w.w[static_cast<Eigen::Index>(j)]);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return rows;
}

double mean_abs_gap(const ScmFit& fit, int from, int to) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < fit.years.size(); ++i)
    if (fit.years[i] >= from && fit.years[i] <= to) {
      s += std::abs(fit.gap[static_cast<Eigen::Index>(i)]);
      ++n;
    }
  if (n == 0) throw ValidationError("gap window has no years");
  return s / n;
}

// ---------------------------------------------------------------------------
// fit

json fit_artifacts(const RunConfig& cfg, const ScmProblem& problem, const ScmFit& fit,
                   const fs::path& out) {
  // Donor weights.
  {
    std::string csv = "donor,weight\n";
    for (const auto& [name, weight] : sorted_weights(fit.weights))
      csv += name + "," + fmtd(weight) + "\n";
    write_file(out / "weights.csv", csv);
  }
  // Predictor weights.
  {
    std::string csv = "predictor,weight\n";
    for (std::size_t i = 0; i < fit.vweights.predictors.size(); ++i)
      csv += fit.vweights.predictors[i] + "," +
             fmtd(fit.vweights.v[static_cast<Eigen::Index>(i)]) + "\n";
    write_file(out / "vweights.csv", csv);
  }
  // Predictor balance in raw units: treated vs the synthetic combination.
  {
    const Eigen::VectorXd synth_x = problem.m.X0_raw * fit.weights.w;
    std::string csv = "predictor,treated,synthetic\n";
    for (std::size_t i = 0; i < problem.m.predictor_names.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      csv += problem.m.predictor_names[i] + "," + fmtd(problem.m.X1_raw[idx]) + "," +
             fmtd(synth_x[idx]) + "\n";
    }
    write_file(out / "predictor_balance.csv", csv);
  }
  // Actual / synthetic / gap paths.
  {
    std::string csv = "year,actual,synthetic,gap\n";
    for (std::size_t i = 0; i < fit.years.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      csv += std::to_string(fit.years[i]) + "," + fmtd(problem.y_treated[idx]) + "," +
             fmtd(fit.synthetic[idx]) + "," + fmtd(fit.gap[idx]) + "\n";
    }
    write_file(out / "paths.csv", csv);
  }
  // Plots.
  {
    SvgPlot plot(problem.treated + ": actual vs synthetic", "year", cfg.outcome);
    const auto yrs = years_as_double(fit.years);
    plot.add_series({"actual", yrs, to_std(problem.y_treated), "#1f4e8c", 2.0, false, true});
    plot.add_series({"synthetic", yrs, to_std(fit.synthetic), "#c23b22", 2.0, true, true});
    plot.add_vline({static_cast<double>(fit.treatment_year), "#777777", true, "treatment"});
    plot.save((out / "fit_paths.svg").string());

    SvgPlot gap_plot(problem.treated + ": gap (actual - synthetic)", "year", cfg.outcome);
    gap_plot.add_series({"gap", yrs, to_std(fit.gap), "#1f4e8c", 2.0, false, true});
    gap_plot.add_hline({0.0, "#555555", true});
    gap_plot.add_vline({static_cast<double>(fit.treatment_year), "#777777", true, "treatment"});
    gap_plot.save((out / "gap.svg").string());
  }

  json summary;
  summary["treated"] = problem.treated;
  summary["pool"] = problem.pool_name;
  summary["treatment_year"] = fit.treatment_year;
  summary["pre_rmspe"] = fit.pre_rmspe;
  summary["post_rmspe"] = fit.post_rmspe;
  summary["objective"] = fit.objective;
  summary["chosen_start"] = fit.chosen_start;
  json jw = json::object();
  for (const auto& [name, weight] : sorted_weights(fit.weights))
    if (weight > 0.0) jw[name] = weight;
  summary["weights"] = jw;
  json jv = json::object();
  for (std::size_t i = 0; i < fit.vweights.predictors.size(); ++i)
    jv[fit.vweights.predictors[i]] = fit.vweights.v[static_cast<Eigen::Index>(i)];
  summary["vweights"] = jv;
  json gaps = json::object();
  for (std::size_t i = 0; i < fit.years.size(); ++i)
    if (fit.years[i] >= fit.treatment_year)
      gaps[std::to_string(fit.years[i])] = fit.gap[static_cast<Eigen::Index>(i)];
  summary["post_gaps"] = gaps;

  json doc;
  doc["summary"] = summary;
  doc["config"] = config_block(cfg);
  write_json(out / "fit.json", doc);
  return summary;
}

// ---------------------------------------------------------------------------
// robustness

json robustness_artifacts(const RunConfig& cfg, const StudySpec& study, const ScmFit& fit,
                          const fs::path& out) {
  json summary;

  // In-space placebos and permutation significance.
  const PlaceboEnsemble ensemble =
      in_space_placebos(study, cfg.robustness.filter_multiplier, cfg.jobs);
  const SignificanceReport sig = significance(ensemble);
  {
    std::string csv = "unit,year,gap,surviving,role\n";
    for (std::size_t i = 0; i < ensemble.years.size(); ++i)
      csv += ensemble.treated + "," + std::to_string(ensemble.years[i]) + "," +
             fmtd(ensemble.treated_fit.gap[static_cast<Eigen::Index>(i)]) + ",1,treated\n";
    for (const auto& p : ensemble.placebos)
      for (std::size_t i = 0; i < ensemble.years.size(); ++i)
        csv += p.unit + "," + std::to_string(ensemble.years[i]) + "," +
               fmtd(p.fit.gap[static_cast<Eigen::Index>(i)]) + "," +
               (p.surviving ? "1" : "0") + ",placebo\n";
    write_file(out / "placebo_gaps.csv", csv);
  }
  {
    std::string csv = "unit,pre_rmspe,post_rmspe,ratio,surviving,treated\n";
    for (const auto& r : sig.ratios)
      csv += r.unit + "," + fmtd(r.pre_rmspe) + "," + fmtd(r.post_rmspe) + "," +
             (r.defined ? fmtd(r.ratio) : std::string("")) + "," + (r.surviving ? "1" : "0") +
             "," + (r.treated ? "1" : "0") + "\n";
    write_file(out / "ratios.csv", csv);
  }
  {
    std::string csv = "year,p_value,gap_vs_mean_placebo\n";
    for (std::size_t i = 0; i < sig.post_years.size(); ++i)
      csv += std::to_string(sig.post_years[i]) + "," +
             fmtd(sig.pvalues[static_cast<Eigen::Index>(i)]) + "," +
             fmtd(sig.gap_vs_mean[static_cast<Eigen::Index>(i)]) + "\n";
    write_file(out / "pvalues.csv", csv);
  }
  {
    SvgPlot plot(study.treated + ": gaps vs in-space placebos", "year", cfg.outcome);
    const auto yrs = years_as_double(ensemble.years);
    bool first = true;
    for (const auto& p : ensemble.placebos) {
      if (!p.surviving) continue;
      plot.add_series({first ? "surviving placebos" : "", yrs, to_std(p.fit.gap), "#b8b8b8",
                       1.0, false, first});
      first = false;
    }
    plot.add_series({study.treated, yrs, to_std(ensemble.treated_fit.gap), "#1f4e8c", 2.4,
                     false, true});
    plot.add_hline({0.0, "#555555", true});
    plot.add_vline({static_cast<double>(study.treatment_year), "#777777", true, "treatment"});
    plot.save((out / "placebo_gaps.svg").string());
  }
  summary["filter_multiplier"] = ensemble.filter_multiplier;
  summary["filter_threshold"] = ensemble.filter_threshold;
  summary["n_placebos"] = ensemble.placebos.size();
  summary["n_surviving"] = sig.n_surviving;
  summary["filtered_units"] = ensemble.filtered_units();
  summary["treated_rank"] = sig.treated_rank;
  json jp = json::object();
  for (std::size_t i = 0; i < sig.post_years.size(); ++i)
    jp[std::to_string(sig.post_years[i])] = sig.pvalues[static_cast<Eigen::Index>(i)];
  summary["p_values"] = jp;

  // In-time placebos: refit at earlier pseudo-treatment years, with the
  // evaluation window capped before the real treatment; each pseudo problem
  // gets its own permutation significance over the pseudo-post window.
  json jtime = json::array();
  for (int placebo_year : cfg.robustness.placebo_years) {
    StudySpec pseudo = study;
    pseudo.treatment_year = placebo_year;
    pseudo.pre_to = placebo_year - 1;
    pseudo.last_year = study.treatment_year - 1;
    for (auto& s : pseudo.predictors)
      std::erase_if(s.at_years, [&](int y) { return y > placebo_year - 1; });
    const PlaceboEnsemble pens =
        in_space_placebos(pseudo, cfg.robustness.filter_multiplier, cfg.jobs);
    const SignificanceReport psig = significance(pens);
    const ScmFit& pfit = pens.treated_fit;

    std::string csv = "year,actual,synthetic,gap\n";
    const Eigen::VectorXd actual = pfit.synthetic + pfit.gap;
    for (std::size_t i = 0; i < pfit.years.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      csv += std::to_string(pfit.years[i]) + "," + fmtd(actual[idx]) + "," +
             fmtd(pfit.synthetic[idx]) + "," + fmtd(pfit.gap[idx]) + "\n";
    }
    write_file(out / ("in_time_" + std::to_string(placebo_year) + ".csv"), csv);

    json jt;
    jt["placebo_year"] = placebo_year;
    jt["pre_rmspe"] = pfit.pre_rmspe;
    jt["mean_abs_gap_placebo_window"] =
        mean_abs_gap(pfit, placebo_year, study.treatment_year - 1);
    jt["benchmark_mean_abs_gap_post"] =
        mean_abs_gap(fit, study.treatment_year, fit.years.back());
    double max_p = 0.0, min_p = 1.0;
    for (Eigen::Index i = 0; i < psig.pvalues.size(); ++i) {
      max_p = std::max(max_p, psig.pvalues[i]);
      min_p = std::min(min_p, psig.pvalues[i]);
    }
    jt["min_p_value"] = min_p;
    jt["max_p_value"] = max_p;
    json jpp = json::object();
    for (std::size_t i = 0; i < psig.post_years.size(); ++i)
      jpp[std::to_string(psig.post_years[i])] = psig.pvalues[static_cast<Eigen::Index>(i)];
    jt["p_values"] = jpp;
    jtime.push_back(jt);
  }
  summary["in_time"] = jtime;

  // Cross-validation of the predictor weights.
  const CvResult cv =
      cross_validate(study, cfg.robustness.cv_train_from, cfg.robustness.cv_train_to,
                     cfg.robustness.cv_validate_from, cfg.robustness.cv_validate_to, &fit);
  {
    std::string csv = "candidate,source,train_rmspe,validation_rmspe,selected\n";
    for (std::size_t i = 0; i < cv.candidates.size(); ++i) {
      const auto& c = cv.candidates[i];
      csv += std::to_string(i) + "," + c.source + "," + fmtd(c.train_rmspe) + "," +
             fmtd(c.validation_rmspe) + "," +
             (static_cast<int>(i) == cv.selected ? "1" : "0") + "\n";
    }
    write_file(out / "cv_candidates.csv", csv);

    std::string wcsv = "donor,weight\n";
    for (const auto& [name, weight] : sorted_weights(cv.weights))
      wcsv += name + "," + fmtd(weight) + "\n";
    write_file(out / "cv_weights.csv", wcsv);
  }
  json jcv;
  jcv["train"] = {cv.train_from, cv.train_to};
  jcv["validate"] = {cv.validate_from, cv.validate_to};
  jcv["validation_rmspe"] = cv.validation_rmspe;
  jcv["benchmark_validation_rmspe"] = cv.benchmark_validation_rmspe;
  jcv["selected"] = cv.candidates[static_cast<std::size_t>(cv.selected)].source;
  json jcw = json::object();
  for (const auto& [name, weight] : sorted_weights(cv.weights))
    if (weight > 1e-6) jcw[name] = weight;
  jcv["weights"] = jcw;
  summary["cross_validation"] = jcv;

  // Leave-one-donor-out jackknife over the positively weighted donors.
  const std::vector<JackknifeRun> jk = jackknife(study, fit, cfg.jobs);
  {
    std::string csv = "dropped,pre_rmspe,final_gap,max_synthetic_deviation\n";
    json jj = json::array();
    for (const auto& run : jk) {
      csv += run.dropped + "," + fmtd(run.fit.pre_rmspe) + "," +
             fmtd(run.fit.gap[run.fit.gap.size() - 1]) + "," +
             fmtd(run.max_synthetic_deviation) + "\n";
      json e;
      e["dropped"] = run.dropped;
      e["pre_rmspe"] = run.fit.pre_rmspe;
      e["final_gap"] = run.fit.gap[run.fit.gap.size() - 1];
      e["max_synthetic_deviation"] = run.max_synthetic_deviation;
      jj.push_back(e);
    }
    write_file(out / "jackknife.csv", csv);
    summary["jackknife"] = jj;
  }

  json doc;
  doc["summary"] = summary;
  doc["config"] = config_block(cfg);
  write_json(out / "robustness.json", doc);
  return summary;
}

// ---------------------------------------------------------------------------
// decompose

json decompose_artifacts(const RunConfig& cfg, const ScmProblem& problem, const ScmFit& fit,
                         const fs::path& out) {
  const Eigen::VectorXd actual_full = problem.y_treated;
  const int last = fit.years.back();

  // HP trends of the full actual and synthetic paths (diagnostic artifact,
  // and the decomposition input when use_trended_paths is set).
  const HpResult hp_actual = hp_filter(actual_full, cfg.trend.hp_lambda);
  const HpResult hp_synth = hp_filter(fit.synthetic, cfg.trend.hp_lambda);
  {
    std::string csv = "year,actual,actual_trend,actual_cycle,synthetic,synthetic_trend\n";
    for (std::size_t i = 0; i < fit.years.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      csv += std::to_string(fit.years[i]) + "," + fmtd(actual_full[idx]) + "," +
             fmtd(hp_actual.trend[idx]) + "," + fmtd(hp_actual.cycle[idx]) + "," +
             fmtd(fit.synthetic[idx]) + "," + fmtd(hp_synth.trend[idx]) + "\n";
    }
    write_file(out / "trends.csv", csv);
  }

  // Window: treatment year through the end of the panel (or post_to).
  const int t0 = problem.year_index(fit.treatment_year);
  const int n_post = static_cast<int>(fit.years.size()) - t0;
  std::vector<int> years(fit.years.begin() + t0, fit.years.end());
  const Eigen::VectorXd actual_w = cfg.trend.use_trended_paths
                                       ? hp_actual.trend.segment(t0, n_post)
                                       : actual_full.segment(t0, n_post);
  const Eigen::VectorXd synth_w = cfg.trend.use_trended_paths
                                      ? hp_synth.trend.segment(t0, n_post)
                                      : fit.synthetic.segment(t0, n_post);

  const double anchor = cfg.trend.potential_anchor == "trend"
                            ? hp_actual.trend[t0]
                            : actual_full[t0];
  const Eigen::VectorXd potential =
      potential_path(fit.treatment_year, anchor, cfg.trend.potential_growth, last);

  // decompose_shortfall also fills the growth split, inferring the potential
  // growth rate from the geometric potential path we just built.
  const TrendDecomposition dec = decompose_shortfall(actual_w, synth_w, potential, years);

  {
    std::string csv =
        "year,actual,synthetic,potential,total,internal,external,"
        "internal_share,external_share,degenerate\n";
    for (const auto& y : dec.years)
      csv += std::to_string(y.year) + "," + fmtd(y.actual) + "," + fmtd(y.synthetic) + "," +
             fmtd(y.potential) + "," + fmtd(y.total) + "," + fmtd(y.internal) + "," +
             fmtd(y.external) + "," + fmtd(y.internal_share) + "," + fmtd(y.external_share) +
             "," + (y.degenerate ? "1" : "0") + "\n";
    write_file(out / "decomposition.csv", csv);
  }
  {
    SvgPlot plot(problem.treated + ": shortfall decomposition", "year", cfg.outcome);
    const auto yrs = years_as_double(years);
    plot.add_series({"actual", yrs, to_std(actual_w), "#1f4e8c", 2.0, false, true});
    plot.add_series({"synthetic", yrs, to_std(synth_w), "#c23b22", 2.0, true, true});
    plot.add_series({"potential", yrs, to_std(potential), "#2a7e43", 2.0, true, true});
    plot.save((out / "decomposition.svg").string());
  }

  json summary;
  summary["window"] = {years.front(), years.back()};
  summary["potential_growth"] = cfg.trend.potential_growth;
  summary["potential_anchor"] = cfg.trend.potential_anchor;
  summary["use_trended_paths"] = cfg.trend.use_trended_paths;
  summary["internal_share"] = dec.internal_share;
  summary["external_share"] = dec.external_share;
  summary["degenerate_years"] = dec.degenerate_years;
  summary["mean_actual_growth"] = dec.mean_actual_growth;
  summary["mean_synthetic_growth"] = dec.mean_synthetic_growth;
  summary["internal_pp"] = dec.internal_pp;
  summary["external_pp"] = dec.external_pp;

  json doc;
  doc["summary"] = summary;
  doc["config"] = config_block(cfg);
  write_json(out / "decomposition.json", doc);
  return summary;
}

// ---------------------------------------------------------------------------
// bsts

json bsts_artifacts(const RunConfig& cfg, const ScmProblem& problem, const fs::path& out) {
  const int fit_through =
      cfg.bsts.fit_through_year > 0 ? cfg.bsts.fit_through_year : problem.treatment_year;
  const int first = problem.years.front();
  const int last = problem.years.back();
  if (fit_through >= last)
    throw ValidationError("bsts: no post-period years after the fitting window");

  const int n_fit = fit_through - first + 1;
  const int n_post = last - fit_through;
  const auto& donors = problem.m.donors;
  const int J = static_cast<int>(donors.size());

  const Eigen::VectorXd y_fit = problem.y_treated.head(n_fit);
  const Eigen::VectorXd y_post = problem.y_treated.tail(n_post);
  Eigen::MatrixXd X_fit(n_fit, J), X_post(n_post, J);
  for (int j = 0; j < J; ++j) {
    X_fit.col(j) = problem.Y_donors.col(j).head(n_fit);
    X_post.col(j) = problem.Y_donors.col(j).tail(n_post);
  }
  std::vector<int> post_years;
  for (int y = fit_through + 1; y <= last; ++y) post_years.push_back(y);

  const BstsFit bfit =
      fit_bsts(y_fit, X_fit, cfg.bsts.to_options(cfg.seed, n_fit), donors);
  const ImpactPosterior posterior = predict_counterfactual(bfit, y_post, X_post, post_years);
  const ImpactSummary report = impact_report(posterior);

  {
    std::string csv =
        "year,actual,cf_mean,cf_lo,cf_hi,effect_mean,effect_lo,effect_hi,"
        "cum_effect_mean,cum_effect_lo,cum_effect_hi,p_cum_negative\n";
    for (const auto& r : report.rows)
      csv += std::to_string(r.year) + "," + fmtd(r.actual) + "," + fmtd(r.cf_mean) + "," +
             fmtd(r.cf_lo) + "," + fmtd(r.cf_hi) + "," + fmtd(r.effect_mean) + "," +
             fmtd(r.effect_lo) + "," + fmtd(r.effect_hi) + "," + fmtd(r.cum_effect_mean) +
             "," + fmtd(r.cum_effect_lo) + "," + fmtd(r.cum_effect_hi) + "," +
             fmtd(r.p_cum_negative) + "\n";
    write_file(out / "bsts_summary.csv", csv);
  }
  {
    std::string csv = "control,inclusion_probability\n";
    for (int j = 0; j < J; ++j)
      csv += donors[static_cast<std::size_t>(j)] + "," + fmtd(bfit.inclusion_prob[j]) + "\n";
    write_file(out / "bsts_inclusion.csv", csv);
  }
  if (cfg.bsts.write_draws) {
    std::string csv = "draw";
    for (int y : post_years) csv += "," + std::to_string(y);
    csv += "\n";
    for (int d = 0; d < posterior.draws.rows(); ++d) {
      csv += std::to_string(d);
      for (int t = 0; t < posterior.draws.cols(); ++t)
        csv += "," + fmtd(posterior.draws(d, t));
      csv += "\n";
    }
    write_file(out / "bsts_draws.csv", csv);
  }
  {
    // Fitting window plus forecast band.
    SvgPlot plot(problem.treated + ": structural time-series counterfactual", "year",
                 cfg.outcome);
    std::vector<double> yrs_all = years_as_double(problem.years);
    plot.add_band({years_as_double(post_years), to_std(posterior.cf_lo),
                   to_std(posterior.cf_hi), "#9ecae1", 0.45});
    plot.add_series({"actual", yrs_all, to_std(problem.y_treated), "#1f4e8c", 2.0, false,
                     true});
    plot.add_series({"counterfactual mean", years_as_double(post_years),
                     to_std(posterior.cf_mean), "#c23b22", 2.0, true, true});
    plot.add_vline(
        {static_cast<double>(fit_through + 1), "#777777", true, "forecast start"});
    plot.save((out / "bsts.svg").string());
  }

  json summary;
  summary["trend_model"] = cfg.bsts.trend;
  summary["fit_window"] = {first, fit_through};
  summary["post_window"] = {post_years.front(), post_years.back()};
  summary["n_draws"] = cfg.bsts.n_draws;
  summary["burn_in"] = cfg.bsts.burn_in;
  summary["kept_draws"] = bfit.n_kept();
  summary["final_mean_gap"] = report.final_mean_gap;
  summary["final_p_cum_negative"] = report.final_p_cum_negative;
  const auto& lastrow = report.rows.back();
  summary["final_actual"] = lastrow.actual;
  summary["final_cf_lo"] = lastrow.cf_lo;
  summary["final_cf_mean"] = lastrow.cf_mean;
  summary["final_cf_hi"] = lastrow.cf_hi;
  summary["actual_below_interval"] = lastrow.actual < lastrow.cf_lo;
  json jinc = json::object();
  std::vector<std::pair<std::string, double>> inc;
  for (int j = 0; j < J; ++j)
    inc.emplace_back(donors[static_cast<std::size_t>(j)], bfit.inclusion_prob[j]);
  std::sort(inc.begin(), inc.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [name, p] : inc) jinc[name] = p;
  summary["inclusion_probabilities"] = jinc;
  json diag;
  diag["ess_sigma_obs"] = posterior.diagnostics.ess_sigma_obs;
  diag["ess_effect"] = posterior.diagnostics.ess_effect;
  diag["rhat_sigma_obs"] = posterior.diagnostics.rhat_sigma_obs;
  diag["warnings"] = posterior.diagnostics.warnings;
  summary["diagnostics"] = diag;

  json doc;
  doc["summary"] = summary;
  doc["config"] = config_block(cfg);
  write_json(out / "bsts.json", doc);
  return summary;
}

// ---------------------------------------------------------------------------
// report

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string report_markdown(const RunConfig& cfg, const json& fit, const json& rob,
                            const json& dec, const json& bst) {
  std::ostringstream md;
  md << "# Synthetic control report: " << fit["treated"].get<std::string>() << "\n\n";
  md << "Treatment year " << fit["treatment_year"].get<int>() << ", donor pool `"
     << fit["pool"].get<std::string>() << "`, seed " << cfg.seed << ".\n\n";

  md << "## Fit\n\n";
  md << "Pre-treatment RMSPE " << fmt2(fit["pre_rmspe"].get<double>())
     << ", post-treatment RMSPE " << fmt2(fit["post_rmspe"].get<double>()) << ".\n\n";
  md << "| donor | weight |\n|---|---|\n";
  for (const auto& [name, w] : fit["weights"].items())
    md << "| " << name << " | " << fmt3(w.get<double>()) << " |\n";
  md << "\n| year | gap |\n|---|---|\n";
  for (const auto& [year, g] : fit["post_gaps"].items())
    md << "| " << year << " | " << fmt2(g.get<double>()) << " |\n";

  md << "\n## Robustness\n\n";
  md << "Pre-fit filter at " << fmt2(rob["filter_multiplier"].get<double>())
     << "x treated pre-RMSPE keeps " << rob["n_surviving"].get<int>() << " of "
     << rob["n_placebos"].get<std::size_t>() << " placebos; treated RMSPE-ratio rank "
     << rob["treated_rank"].get<int>() << ".\n\n";
  md << "| year | permutation p |\n|---|---|\n";
  for (const auto& [year, p] : rob["p_values"].items())
    md << "| " << year << " | " << fmt3(p.get<double>()) << " |\n";
  for (const auto& jt : rob["in_time"]) {
    md << "\nIn-time placebo at " << jt["placebo_year"].get<int>() << ": mean |gap| "
       << fmt2(jt["mean_abs_gap_placebo_window"].get<double>())
       << " over the placebo window vs " << fmt2(jt["benchmark_mean_abs_gap_post"].get<double>())
       << " for the real treatment; smallest permutation p "
       << fmt3(jt["min_p_value"].get<double>()) << ".\n";
  }
  const auto& jcv = rob["cross_validation"];
  md << "\nCross-validation (train " << jcv["train"][0].get<int>() << "-"
     << jcv["train"][1].get<int>() << ", validate " << jcv["validate"][0].get<int>() << "-"
     << jcv["validate"][1].get<int>() << "): validation RMSPE "
     << fmt2(jcv["validation_rmspe"].get<double>()) << " vs benchmark "
     << fmt2(jcv["benchmark_validation_rmspe"].get<double>()) << " (selected `"
     << jcv["selected"].get<std::string>() << "`).\n";

  md << "\n## Shortfall decomposition\n\n";
  md << "Window " << dec["window"][0].get<int>() << "-" << dec["window"][1].get<int>()
     << ", potential growth " << fmt2(dec["potential_growth"].get<double>())
     << "% anchored at the " << dec["potential_anchor"].get<std::string>()
     << " value.  Internal share " << fmt3(dec["internal_share"].get<double>())
     << ", external share " << fmt3(dec["external_share"].get<double>()) << ".\n\n";
  md << "Growth " << fmt2(dec["mean_actual_growth"].get<double>()) << "%/yr actual vs "
     << fmt2(dec["mean_synthetic_growth"].get<double>()) << "%/yr synthetic: internal "
     << fmt2(dec["internal_pp"].get<double>()) << " pp, external "
     << fmt2(dec["external_pp"].get<double>()) << " pp of the "
     << fmt2(dec["potential_growth"].get<double>()) << "% benchmark.\n";

  md << "\n## Structural time-series counterfactual\n\n";
  md << "Trend `" << bst["trend_model"].get<std::string>() << "`, "
     << bst["kept_draws"].get<int>() << " kept draws.  Final-year gap "
     << fmt2(bst["final_mean_gap"].get<double>()) << " (counterfactual mean minus actual), "
     << "actual " << (bst["actual_below_interval"].get<bool>() ? "below" : "inside")
     << " the 95% interval [" << fmt2(bst["final_cf_lo"].get<double>()) << ", "
     << fmt2(bst["final_cf_hi"].get<double>()) << "], P(cumulative effect < 0) = "
     << fmt3(bst["final_p_cum_negative"].get<double>()) << ".\n";

  md << "\n## Artifacts\n\n"
     << "`weights.csv`, `vweights.csv`, `predictor_balance.csv`, `paths.csv`, "
        "`fit_paths.svg`, `gap.svg`, `placebo_gaps.csv`, `ratios.csv`, `pvalues.csv`, "
        "`placebo_gaps.svg`, `in_time_<year>.csv`, `cv_candidates.csv`, `cv_weights.csv`, "
        "`jackknife.csv`, `trends.csv`, `decomposition.csv`, `decomposition.svg`, "
        "`bsts_summary.csv`, `bsts_inclusion.csv`, `bsts.svg`, plus one JSON summary per "
        "stage embedding the resolved configuration.\n";
  return md.str();
}

}  // namespace

StudySpec make_study(const Panel& panel, const RunConfig& cfg) {
  StudySpec study;
  study.panel = &panel;
  study.predictors = cfg.predictors;
  study.pool = cfg.pool;
  study.treated = cfg.treated;
  study.outcome = cfg.outcome;
  study.treatment_year = cfg.treatment_year;
  study.pre_from = cfg.pre_from > 0 ? cfg.pre_from : panel.first_year;
  study.pre_to = cfg.treatment_year - 1;
  study.last_year = cfg.post_to;
  study.scm = cfg.scm_options();
  return study;
}

ScmFit run_fit(const Panel& panel, const RunConfig& cfg) {
  const StudySpec study = make_study(panel, cfg);
  return solve_nested(study.problem(), study.scm);
}

void cmd_fit(const RunConfig& cfg) {
  const Panel panel = load_input_panel(cfg);
  const fs::path out = ensure_out_dir(cfg);
  const StudySpec study = make_study(panel, cfg);
  const ScmProblem problem = study.problem();
  const ScmFit fit = solve_nested(problem, study.scm);
  fit_artifacts(cfg, problem, fit, out);
}

void cmd_robustness(const RunConfig& cfg) {
  const Panel panel = load_input_panel(cfg);
  const fs::path out = ensure_out_dir(cfg);
  const StudySpec study = make_study(panel, cfg);
  const ScmFit fit = solve_nested(study.problem(), study.scm);
  robustness_artifacts(cfg, study, fit, out);
}

void cmd_decompose(const RunConfig& cfg) {
  const Panel panel = load_input_panel(cfg);
  const fs::path out = ensure_out_dir(cfg);
  const StudySpec study = make_study(panel, cfg);
  const ScmProblem problem = study.problem();
  const ScmFit fit = solve_nested(problem, study.scm);
  decompose_artifacts(cfg, problem, fit, out);
}

void cmd_bsts(const RunConfig& cfg) {
  const Panel panel = load_input_panel(cfg);
  const fs::path out = ensure_out_dir(cfg);
  const StudySpec study = make_study(panel, cfg);
  bsts_artifacts(cfg, study.problem(), out);
}

void cmd_simulate(const RunConfig& cfg) {
  const fs::path out = ensure_out_dir(cfg);
  const GeneratedPanel gp = generate_panel(cfg.simulate.dgp);
  save_panel(gp.panel, (out / "simulated_panel.csv").string());

  json truth;
  truth["treated"] = gp.treated;
  truth["outcome"] = gp.outcome;
  truth["donors"] = gp.donors;
  truth["predictors"] = gp.predictor_variables;
  json jw = json::object();
  for (std::size_t j = 0; j < gp.donors.size(); ++j)
    jw[gp.donors[j]] = gp.true_weights.size() ? gp.true_weights[static_cast<Eigen::Index>(j)]
                                              : 0.0;
  truth["true_weights"] = jw;
  json jeff = json::object(), jcf = json::object();
  for (int t = 0; t < gp.panel.n_years(); ++t) {
    const std::string year = std::to_string(gp.panel.first_year + t);
    jeff[year] = gp.injected_effect[t];
    jcf[year] = gp.treated_counterfactual[t];
  }
  truth["injected_effect"] = jeff;
  truth["treated_counterfactual"] = jcf;
  json doc;
  doc["summary"] = truth;
  doc["config"] = config_block(cfg);
  write_json(out / "truth.json", doc);
}

void cmd_report(const RunConfig& cfg) {
  const Panel panel = load_input_panel(cfg);
  const fs::path out = ensure_out_dir(cfg);
  const StudySpec study = make_study(panel, cfg);
  const ScmProblem problem = study.problem();
  const ScmFit fit = solve_nested(problem, study.scm);

  const json jfit = fit_artifacts(cfg, problem, fit, out);
  const json jrob = robustness_artifacts(cfg, study, fit, out);
  const json jdec = decompose_artifacts(cfg, problem, fit, out);
  const json jbst = bsts_artifacts(cfg, problem, out);

  write_file(out / "report.md", report_markdown(cfg, jfit, jrob, jdec, jbst));
}

int run_command(const std::string& name, const RunConfig& cfg) {
  try {
    // Simulation needs no study definition; every other command gets the
    // full validation pass before touching any input.
    if (name != "simulate") cfg.validate();
    if (name == "fit")
      cmd_fit(cfg);
    else if (name == "robustness")
      cmd_robustness(cfg);
    else if (name == "decompose")
      cmd_decompose(cfg);
    else if (name == "bsts")
      cmd_bsts(cfg);
    else if (name == "simulate")
      cmd_simulate(cfg);
    else if (name == "report")
      cmd_report(cfg);
    else
      throw ValidationError("unknown command '" + name + "'");
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace synthcf
