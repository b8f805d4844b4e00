#pragma once

// Run configuration: JSON file + command-line overrides, validated before any
// computation and serialized into every artifact for provenance.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthcf/bsts.hpp"
#include "synthcf/dgp.hpp"
#include "synthcf/panel.hpp"
#include "synthcf/scm.hpp"

namespace synthcf {

struct RobustnessConfig {
  std::vector<int> placebo_years = {2006};  // 2000/2005/2008 also supported
  double filter_multiplier = 5.0;
  int cv_train_from = 1990, cv_train_to = 1998;
  int cv_validate_from = 1999, cv_validate_to = 2014;
};

struct TrendConfig {
  double hp_lambda = 100.0;  // yearly-frequency smoothing
  double potential_growth = 4.5;
  std::string potential_anchor = "actual";  // "actual" | "trend" value at treatment year
  bool use_trended_paths = false;           // decompose HP trends instead of raw paths
};

struct BstsConfig {
  std::string trend = "local-linear";  // or "local-level"
  int n_draws = 10000;
  int burn_in = 2000;
  int n_chains = 1;
  double expected_model_size = 3.0;
  double zellner_g = 0.0;  // 0 -> pre-period length
  double obs_prior_shape = 0.01, obs_prior_scale = 0.01;
  double level_prior_shape = 0.01, level_prior_scale = 0.01;
  double slope_prior_shape = 0.01, slope_prior_scale = 0.01;
  bool write_draws = false;
  int fit_through_year = 0;  // 0 -> treatment year (fit includes it)

  BstsOptions to_options(std::uint64_t seed, int pre_length) const;
};

struct SimulateConfig {
  DgpSpec dgp;
};

struct RunConfig {
  std::string panel_path;
  std::string schema_path;  // optional schema-mapping JSON
  std::string outcome = "gdp_pc";
  std::string treated;
  int treatment_year = 0;
  int pre_from = 0;  // 0 -> first panel year
  int post_to = 0;   // 0 -> last panel year
  DonorPoolSpec pool;
  std::vector<PredictorSpec> predictors;
  std::uint64_t seed = 2014;
  int multistarts = 20;
  double nm_tol = 1e-9;
  int jobs = 1;
  std::string out_dir;  // resolved against --out > config > env > "./out"
  RobustnessConfig robustness;
  TrendConfig trend;
  BstsConfig bsts;
  SimulateConfig simulate;

  int pre_to() const { return treatment_year - 1; }
  ScmOptions scm_options() const;

  // Generic option sanity (solver, robustness, BSTS, DGP numerics); applied
  // at load time to every config.  Throws ValidationError listing every
  // problem found.
  void validate_options() const;
  // Full study validation on top of validate_options(): panel, treated unit,
  // pool, predictors, and window consistency.  Simulation-only runs skip
  // this; study commands apply it before any computation.
  void validate() const;
};

// Flag overrides applied on top of the file values; empty/unset = keep.
struct ConfigOverrides {
  std::optional<std::string> panel;
  std::optional<std::string> treated;
  std::optional<int> treatment_year;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

// Environment variable consulted for the default output directory.
inline constexpr const char* kOutDirEnvVar = "SYNTHCF_OUT";

RunConfig load_run_config(const std::string& config_path, const ConfigOverrides& overrides = {});
std::string run_config_to_json(const RunConfig& cfg);  // resolved provenance block

}  // namespace synthcf
