#include "synthcf/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "synthcf/errors.hpp"

namespace synthcf {

namespace {

using json = nlohmann::ordered_json;

json parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config: cannot open '" + path + "'");
  try {
    return json::parse(f, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: '" + path + "' is not valid JSON: " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

// Relative data paths are resolved against the config file's directory, so a
// config can be run from anywhere.
std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (base / p).lexically_normal().string();
}

std::vector<PredictorSpec> parse_predictors(const json& j) {
  std::vector<PredictorSpec> out;
  for (const auto& e : j) {
    PredictorSpec s;
    if (e.is_string()) {
      s.variable = e.get<std::string>();
    } else {
      check_keys(e, {"variable", "at_years", "standardize"}, "predictors[]");
      s.variable = e.at("variable").get<std::string>();
      s.at_years = e.value("at_years", std::vector<int>{});
      s.standardize = e.value("standardize", true);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

BstsOptions BstsConfig::to_options(std::uint64_t seed, int pre_length) const {
  BstsOptions o;
  if (trend == "local-linear")
    o.trend = TrendModel::LocalLinear;
  else if (trend == "local-level")
    o.trend = TrendModel::LocalLevel;
  else
    throw ValidationError("config: bsts.trend must be 'local-linear' or 'local-level'");
  o.n_draws = n_draws;
  o.burn_in = burn_in;
  o.n_chains = n_chains;
  o.seed = seed;
  o.expected_model_size = expected_model_size;
  o.zellner_g = zellner_g > 0.0 ? zellner_g : static_cast<double>(pre_length);
  o.obs_prior = {obs_prior_shape, obs_prior_scale};
  o.level_prior = {level_prior_shape, level_prior_scale};
  o.slope_prior = {slope_prior_shape, slope_prior_scale};
  return o;
}

ScmOptions RunConfig::scm_options() const {
  ScmOptions o;
  o.multistarts = multistarts;
  o.seed = seed;
  o.nm_tol = nm_tol;
  return o;
}

namespace {

void raise_problems(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ValidationError(msg);
}

void collect_option_problems(const RunConfig& cfg, std::vector<std::string>& problems) {
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };

  need(cfg.multistarts >= 0, "multistarts must be >= 0");
  need(cfg.nm_tol > 0.0, "nm_tol must be positive");
  need(cfg.jobs >= 1, "jobs must be >= 1");

  need(cfg.robustness.filter_multiplier > 0.0,
       "robustness.filter_multiplier must be positive");
  need(cfg.robustness.cv_train_from <= cfg.robustness.cv_train_to &&
           cfg.robustness.cv_train_to < cfg.robustness.cv_validate_from &&
           cfg.robustness.cv_validate_from <= cfg.robustness.cv_validate_to,
       "cross-validation windows must be disjoint and ordered");

  need(cfg.trend.hp_lambda >= 0.0, "trend.hp_lambda must be >= 0");
  need(cfg.trend.potential_anchor == "actual" || cfg.trend.potential_anchor == "trend",
       "trend.potential_anchor must be 'actual' or 'trend'");

  need(cfg.bsts.trend == "local-linear" || cfg.bsts.trend == "local-level",
       "bsts.trend must be 'local-linear' or 'local-level'");
  need(cfg.bsts.n_draws > cfg.bsts.burn_in && cfg.bsts.burn_in >= 0,
       "bsts.n_draws must exceed bsts.burn_in");
  need(cfg.bsts.n_chains >= 1, "bsts.n_chains must be >= 1");
  need(cfg.bsts.expected_model_size > 0.0, "bsts.expected_model_size must be positive");

  const DgpSpec& d = cfg.simulate.dgp;
  need(d.n_donors >= 2, "simulate.n_donors must be >= 2");
  need(d.n_years >= 4, "simulate.n_years must be >= 4");
  need(d.treatment_year > d.first_year &&
           d.treatment_year < d.first_year + d.n_years,
       "simulate.treatment_year must fall inside the simulated window");
  need(d.noise_sd >= 0.0, "simulate.noise_sd must be >= 0");
  need(d.n_predictors >= 0, "simulate.n_predictors must be >= 0");
  need(d.n_factors >= 1, "simulate.n_factors must be >= 1");
}

}  // namespace

void RunConfig::validate_options() const {
  std::vector<std::string> problems;
  collect_option_problems(*this, problems);
  raise_problems(problems);
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };

  need(!panel_path.empty(), "panel path is empty");
  need(!treated.empty(), "treated unit is empty");
  need(!outcome.empty(), "outcome variable is empty");
  need(treatment_year != 0, "treatment_year is not set");
  need(pool.included.size() >= 2, "donor pool needs at least 2 units");
  need(!predictors.empty(), "no predictors configured");
  for (const auto& p : predictors)
    need(!p.variable.empty(), "predictor with empty variable name");
  for (int y : robustness.placebo_years)
    need(y < treatment_year, "placebo year " + std::to_string(y) +
                                 " is not before the treatment year");
  need(robustness.cv_validate_to <= treatment_year || treatment_year == 0,
       "cross-validation must end by the treatment year");

  collect_option_problems(*this, problems);
  raise_problems(problems);
}

RunConfig load_run_config(const std::string& config_path, const ConfigOverrides& overrides) {
  const json j = parse_file(config_path);
  const std::filesystem::path base = std::filesystem::path(config_path).parent_path();

  check_keys(j,
             {"panel", "schema", "outcome", "treated", "treatment_year", "pre_from", "post_to",
              "pool", "predictors", "seed", "multistarts", "nm_tol", "jobs", "out_dir",
              "robustness", "trend", "bsts", "simulate"},
             "the top level");

  RunConfig cfg;
  try {
    cfg.panel_path = resolve(j.value("panel", ""), base);
    cfg.schema_path = resolve(j.value("schema", ""), base);
    cfg.outcome = j.value("outcome", cfg.outcome);
    cfg.treated = j.value("treated", "");
    cfg.treatment_year = j.value("treatment_year", 0);
    cfg.pre_from = j.value("pre_from", 0);
    cfg.post_to = j.value("post_to", 0);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.multistarts = j.value("multistarts", cfg.multistarts);
    cfg.nm_tol = j.value("nm_tol", cfg.nm_tol);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.out_dir = j.value("out_dir", "");

    if (j.contains("pool")) {
      const auto& p = j.at("pool");
      check_keys(p, {"name", "included", "excluded"}, "pool");
      cfg.pool.name = p.value("name", "custom");
      cfg.pool.included = p.value("included", std::vector<std::string>{});
      cfg.pool.excluded = p.value("excluded", std::vector<std::string>{});
    }
    if (j.contains("predictors")) cfg.predictors = parse_predictors(j.at("predictors"));

    if (j.contains("robustness")) {
      const auto& r = j.at("robustness");
      check_keys(r, {"placebo_years", "filter_multiplier", "cv_train", "cv_validate"},
                 "robustness");
      cfg.robustness.placebo_years =
          r.value("placebo_years", cfg.robustness.placebo_years);
      cfg.robustness.filter_multiplier =
          r.value("filter_multiplier", cfg.robustness.filter_multiplier);
      if (r.contains("cv_train")) {
        const auto w = r.at("cv_train").get<std::vector<int>>();
        if (w.size() != 2) throw ValidationError("config: cv_train must be [from, to]");
        cfg.robustness.cv_train_from = w[0];
        cfg.robustness.cv_train_to = w[1];
      }
      if (r.contains("cv_validate")) {
        const auto w = r.at("cv_validate").get<std::vector<int>>();
        if (w.size() != 2) throw ValidationError("config: cv_validate must be [from, to]");
        cfg.robustness.cv_validate_from = w[0];
        cfg.robustness.cv_validate_to = w[1];
      }
    }

    if (j.contains("trend")) {
      const auto& t = j.at("trend");
      check_keys(t, {"hp_lambda", "potential_growth", "potential_anchor", "use_trended_paths"},
                 "trend");
      cfg.trend.hp_lambda = t.value("hp_lambda", cfg.trend.hp_lambda);
      cfg.trend.potential_growth = t.value("potential_growth", cfg.trend.potential_growth);
      cfg.trend.potential_anchor = t.value("potential_anchor", cfg.trend.potential_anchor);
      cfg.trend.use_trended_paths =
          t.value("use_trended_paths", cfg.trend.use_trended_paths);
    }

    if (j.contains("bsts")) {
      const auto& b = j.at("bsts");
      check_keys(b,
                 {"trend", "n_draws", "burn_in", "n_chains", "expected_model_size",
                  "zellner_g", "obs_prior", "level_prior", "slope_prior", "write_draws",
                  "fit_through_year"},
                 "bsts");
      cfg.bsts.trend = b.value("trend", cfg.bsts.trend);
      cfg.bsts.n_draws = b.value("n_draws", cfg.bsts.n_draws);
      cfg.bsts.burn_in = b.value("burn_in", cfg.bsts.burn_in);
      cfg.bsts.n_chains = b.value("n_chains", cfg.bsts.n_chains);
      cfg.bsts.expected_model_size =
          b.value("expected_model_size", cfg.bsts.expected_model_size);
      cfg.bsts.zellner_g = b.value("zellner_g", cfg.bsts.zellner_g);
      auto prior = [&](const char* key, double& shape, double& scale) {
        if (!b.contains(key)) return;
        const auto w = b.at(key).get<std::vector<double>>();
        if (w.size() != 2)
          throw ValidationError(std::string("config: bsts.") + key + " must be [shape, scale]");
        shape = w[0];
        scale = w[1];
      };
      prior("obs_prior", cfg.bsts.obs_prior_shape, cfg.bsts.obs_prior_scale);
      prior("level_prior", cfg.bsts.level_prior_shape, cfg.bsts.level_prior_scale);
      prior("slope_prior", cfg.bsts.slope_prior_shape, cfg.bsts.slope_prior_scale);
      cfg.bsts.write_draws = b.value("write_draws", cfg.bsts.write_draws);
      cfg.bsts.fit_through_year = b.value("fit_through_year", cfg.bsts.fit_through_year);
    }

    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      check_keys(s,
                 {"n_donors", "first_year", "n_years", "treatment_year", "n_factors",
                  "n_predictors", "noise_sd", "base_level", "effect", "effect_relative",
                  "treated_in_hull", "seed"},
                 "simulate");
      DgpSpec& d = cfg.simulate.dgp;
      d.n_donors = s.value("n_donors", d.n_donors);
      d.first_year = s.value("first_year", d.first_year);
      d.n_years = s.value("n_years", d.n_years);
      d.treatment_year = s.value("treatment_year", d.treatment_year);
      d.n_factors = s.value("n_factors", d.n_factors);
      d.n_predictors = s.value("n_predictors", d.n_predictors);
      d.noise_sd = s.value("noise_sd", d.noise_sd);
      d.base_level = s.value("base_level", d.base_level);
      d.effect = s.value("effect", d.effect);
      d.effect_relative = s.value("effect_relative", d.effect_relative);
      d.treated_in_hull = s.value("treated_in_hull", d.treated_in_hull);
      d.seed = s.value("seed", d.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: '" + config_path + "': " + e.what());
  }

  // Overrides beat the file; the environment only supplies the output default.
  if (overrides.panel) cfg.panel_path = *overrides.panel;
  if (overrides.treated) cfg.treated = *overrides.treated;
  if (overrides.treatment_year) cfg.treatment_year = *overrides.treatment_year;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;
  if (overrides.out) {
    cfg.out_dir = *overrides.out;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv(kOutDirEnvVar);
    cfg.out_dir = env && *env ? env : "out";
  }

  cfg.validate_options();
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["panel"] = cfg.panel_path;
  if (!cfg.schema_path.empty()) j["schema"] = cfg.schema_path;
  j["outcome"] = cfg.outcome;
  j["treated"] = cfg.treated;
  j["treatment_year"] = cfg.treatment_year;
  j["pre_from"] = cfg.pre_from;
  j["post_to"] = cfg.post_to;
  j["pool"] = {{"name", cfg.pool.name},
               {"included", cfg.pool.included},
               {"excluded", cfg.pool.excluded}};
  json preds = json::array();
  for (const auto& p : cfg.predictors) {
    json e;
    e["variable"] = p.variable;
    if (!p.at_years.empty()) e["at_years"] = p.at_years;
    if (!p.standardize) e["standardize"] = false;
    preds.push_back(e);
  }
  j["predictors"] = preds;
  j["seed"] = cfg.seed;
  j["multistarts"] = cfg.multistarts;
  j["nm_tol"] = cfg.nm_tol;
  j["jobs"] = cfg.jobs;
  j["out_dir"] = cfg.out_dir;
  j["robustness"] = {{"placebo_years", cfg.robustness.placebo_years},
                     {"filter_multiplier", cfg.robustness.filter_multiplier},
                     {"cv_train", {cfg.robustness.cv_train_from, cfg.robustness.cv_train_to}},
                     {"cv_validate",
                      {cfg.robustness.cv_validate_from, cfg.robustness.cv_validate_to}}};
  j["trend"] = {{"hp_lambda", cfg.trend.hp_lambda},
                {"potential_growth", cfg.trend.potential_growth},
                {"potential_anchor", cfg.trend.potential_anchor},
                {"use_trended_paths", cfg.trend.use_trended_paths}};
  j["bsts"] = {{"trend", cfg.bsts.trend},
               {"n_draws", cfg.bsts.n_draws},
               {"burn_in", cfg.bsts.burn_in},
               {"n_chains", cfg.bsts.n_chains},
               {"expected_model_size", cfg.bsts.expected_model_size},
               {"zellner_g", cfg.bsts.zellner_g},
               {"obs_prior", {cfg.bsts.obs_prior_shape, cfg.bsts.obs_prior_scale}},
               {"level_prior", {cfg.bsts.level_prior_shape, cfg.bsts.level_prior_scale}},
               {"slope_prior", {cfg.bsts.slope_prior_shape, cfg.bsts.slope_prior_scale}},
               {"write_draws", cfg.bsts.write_draws},
               {"fit_through_year", cfg.bsts.fit_through_year}};
  return j.dump(2) + "\n";
}

}  // namespace synthcf
