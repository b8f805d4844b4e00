#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "synthcf/panel.hpp"
#include "synthcf/pipeline.hpp"

using namespace synthcf;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path tmp_root() {
  const fs::path p = fs::path(SYNTHCF_TEST_TMP) / "pipeline";
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE_MESSAGE(f.good(), "missing file: ", p.string());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// One tiny simulated panel shared by the pipeline tests: 6 donors, 22 years,
// treatment 2009, a clear negative effect.
const fs::path& sim_panel_path() {
  static fs::path panel_csv = [] {
    const fs::path dir = tmp_root() / "sim";
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "sim.json";
    json cfg = {
        {"out_dir", dir.string()},
        {"seed", 7},
        {"simulate",
         {{"n_donors", 6},
          {"first_year", 1994},
          {"n_years", 22},
          {"treatment_year", 2009},
          {"n_predictors", 2},
          {"noise_sd", 0.015},
          {"effect", {-0.05, -0.06, -0.07, -0.07, -0.07, -0.07, -0.07}},
          {"effect_relative", true},
          {"treated_in_hull", true}}},
    };
    write_text(cfg_path, cfg.dump(2) + "\n");
    const RunConfig rc = load_run_config(cfg_path.string());
    REQUIRE(run_command("simulate", rc) == 0);
    return dir / "simulated_panel.csv";
  }();
  return panel_csv;
}

// A fast full run configuration against the simulated panel.
json base_config(const fs::path& out_dir) {
  return json{
      {"panel", sim_panel_path().string()},
      {"outcome", "outcome"},
      {"treated", "T00"},
      {"treatment_year", 2009},
      {"pool", {{"name", "all-donors"},
                {"included", {"D01", "D02", "D03", "D04", "D05", "D06"}}}},
      {"predictors", {"x01", "x02", "outcome"}},
      {"seed", 2014},
      {"multistarts", 2},
      {"jobs", 2},
      {"out_dir", out_dir.string()},
      {"robustness",
       {{"placebo_years", {2002}},
        {"filter_multiplier", 5.0},
        {"cv_train", {1994, 2001}},
        {"cv_validate", {2002, 2008}}}},
      // Potential growth is set comfortably above the simulated drift so the
      // shortfall decomposition always has a positive total to split.
      {"trend", {{"hp_lambda", 100.0}, {"potential_growth", 7.0}}},
      {"bsts",
       {{"trend", "local-level"},
        {"n_draws", 400},
        {"burn_in", 150},
        {"expected_model_size", 3.0}}},
  };
}

}  // namespace

TEST_CASE("config loading: file values, overrides, and output resolution") {
  const fs::path dir = tmp_root() / "cfg";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.json";
  json j = base_config(dir / "outA");
  write_text(cfg_path, j.dump(2) + "\n");

  const RunConfig cfg = load_run_config(cfg_path.string());
  CHECK(cfg.treated == "T00");
  CHECK(cfg.treatment_year == 2009);
  CHECK(cfg.seed == 2014);
  CHECK(cfg.multistarts == 2);
  CHECK(cfg.jobs == 2);
  CHECK(cfg.pool.included.size() == 6);
  CHECK(cfg.predictors.size() == 3);
  CHECK(cfg.predictors[2].variable == "outcome");
  CHECK(cfg.robustness.cv_train_from == 1994);
  CHECK(cfg.robustness.cv_validate_to == 2008);
  CHECK(cfg.trend.potential_growth == 7.0);
  CHECK(cfg.bsts.n_draws == 400);
  CHECK(fs::path(cfg.out_dir).filename() == "outA");
  // Relative panel paths resolve against the config directory.
  CHECK(fs::path(cfg.panel_path).is_absolute());

  // Overrides beat the file.
  ConfigOverrides ov;
  ov.treated = "D03";
  ov.seed = 99;
  ov.out = (dir / "outB").string();
  ov.jobs = 1;
  const RunConfig cfg2 = load_run_config(cfg_path.string(), ov);
  CHECK(cfg2.treated == "D03");
  CHECK(cfg2.seed == 99);
  CHECK(cfg2.jobs == 1);
  CHECK(fs::path(cfg2.out_dir).filename() == "outB");

  // With no out_dir anywhere, the environment variable wins over "out".
  json no_out = j;
  no_out.erase("out_dir");
  const fs::path cfg3_path = dir / "no_out.json";
  write_text(cfg3_path, no_out.dump(2) + "\n");
  setenv(kOutDirEnvVar, (dir / "outEnv").string().c_str(), 1);
  const RunConfig cfg3 = load_run_config(cfg3_path.string());
  CHECK(fs::path(cfg3.out_dir).filename() == "outEnv");
  unsetenv(kOutDirEnvVar);
  const RunConfig cfg4 = load_run_config(cfg3_path.string());
  CHECK(fs::path(cfg4.out_dir).filename() == "out");
}

TEST_CASE("config rejects unknown keys and collects all validation problems") {
  const fs::path dir = tmp_root() / "badcfg";
  fs::create_directories(dir);

  json j = base_config(dir / "out");
  j["paneel"] = "typo.csv";
  const fs::path p1 = dir / "unknown.json";
  write_text(p1, j.dump() + "\n");
  CHECK_THROWS_WITH_AS(load_run_config(p1.string()), doctest::Contains("paneel"),
                       ValidationError);

  // Nested unknown key.
  json j2 = base_config(dir / "out");
  j2["bsts"]["ndraws"] = 100;
  const fs::path p2 = dir / "unknown2.json";
  write_text(p2, j2.dump() + "\n");
  CHECK_THROWS_WITH_AS(load_run_config(p2.string()), doctest::Contains("ndraws"),
                       ValidationError);

  // Option-level problems are caught at load time.
  json j3 = base_config(dir / "out");
  j3["multistarts"] = -2;
  const fs::path p3 = dir / "invalid.json";
  write_text(p3, j3.dump() + "\n");
  CHECK_THROWS_WITH_AS(load_run_config(p3.string()), doctest::Contains("multistarts"),
                       ValidationError);

  // Study-level problems are all collected when a study command validates.
  json j4 = base_config(dir / "out");
  j4["treatment_year"] = 0;
  j4["treated"] = "";
  const fs::path p4 = dir / "invalid2.json";
  write_text(p4, j4.dump() + "\n");
  const RunConfig broken = load_run_config(p4.string());  // loads fine
  try {
    broken.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("treatment_year") != std::string::npos);
    CHECK(msg.find("treated") != std::string::npos);
  }
  CHECK(run_command("fit", broken) == 1);

  // Malformed JSON.
  const fs::path p5 = dir / "broken.json";
  write_text(p5, "{ not json ]\n");
  CHECK_THROWS_AS(load_run_config(p5.string()), ValidationError);
  CHECK_THROWS_AS(load_run_config((dir / "absent.json").string()), ValidationError);
}

TEST_CASE("run_command maps error classes to exit codes") {
  const fs::path dir = tmp_root() / "codes";
  fs::create_directories(dir);
  json j = base_config(dir / "out");
  const fs::path cfg_path = dir / "run.json";
  write_text(cfg_path, j.dump() + "\n");
  RunConfig cfg = load_run_config(cfg_path.string());

  CHECK(run_command("fit", cfg) == 0);

  // Unknown treated unit -> ValidationError -> 1.
  RunConfig bad = cfg;
  bad.treated = "NOPE";
  CHECK(run_command("fit", bad) == 1);

  // Unknown command name -> 1 as well (a usage error).
  CHECK(run_command("frobnicate", cfg) == 1);

  // Panel file missing -> 1.
  RunConfig gone = cfg;
  gone.panel_path = (dir / "none.csv").string();
  CHECK(run_command("fit", gone) == 1);
}

TEST_CASE("simulate writes a loadable panel plus ground truth") {
  const fs::path panel_path = sim_panel_path();
  const Panel p = load_panel(panel_path.string());
  CHECK(p.units.size() == 7);
  CHECK(p.first_year == 1994);
  CHECK(p.last_year == 2015);

  const json truth = json::parse(read_text(panel_path.parent_path() / "truth.json"));
  REQUIRE(truth.contains("summary"));
  CHECK(truth["summary"].contains("true_weights"));
  CHECK(truth["summary"].contains("injected_effect"));
  CHECK(truth["summary"].contains("treated_counterfactual"));
  CHECK(truth["summary"]["true_weights"].size() == 6);
  // The injected effect is keyed by year and zero before treatment.
  CHECK(truth["summary"]["injected_effect"]["2000"].get<double>() == 0.0);
  CHECK(truth["summary"]["injected_effect"]["2009"].get<double>() < 0.0);

  // Re-simulating is byte-identical.
  const std::string before = read_text(panel_path);
  const RunConfig rc =
      load_run_config((panel_path.parent_path() / "sim.json").string());
  REQUIRE(run_command("simulate", rc) == 0);
  CHECK(read_text(panel_path) == before);
}

TEST_CASE("fit artifacts: files exist, summary is coherent, reruns are byte-identical") {
  const fs::path dir = tmp_root() / "fit";
  const fs::path out = dir / "out";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.json";
  write_text(cfg_path, base_config(out).dump(2) + "\n");
  const RunConfig cfg = load_run_config(cfg_path.string());
  REQUIRE(run_command("fit", cfg) == 0);

  for (const char* name : {"weights.csv", "vweights.csv", "predictor_balance.csv",
                           "paths.csv", "fit_paths.svg", "gap.svg", "fit.json"})
    CHECK_MESSAGE(fs::exists(out / name), name);

  const json fit = json::parse(read_text(out / "fit.json"));
  CHECK(fit["summary"]["treated"] == "T00");
  CHECK(fit["summary"]["treatment_year"] == 2009);
  const double pre = fit["summary"]["pre_rmspe"].get<double>();
  const double post = fit["summary"]["post_rmspe"].get<double>();
  CHECK(pre > 0.0);
  CHECK(post > pre);  // injected effect dominates noise
  CHECK(fit["config"]["seed"] == 2014);

  // Weights CSV: header plus one row per donor, weights summing to ~1.
  const std::string weights = read_text(out / "weights.csv");
  CHECK(weights.rfind("donor,weight", 0) == 0);

  // Byte-identical rerun into a second directory.
  const fs::path out2 = dir / "out2";
  RunConfig cfg2 = cfg;
  cfg2.out_dir = out2.string();
  REQUIRE(run_command("fit", cfg2) == 0);
  for (const char* name : {"weights.csv", "vweights.csv", "predictor_balance.csv",
                           "paths.csv", "fit_paths.svg", "gap.svg"})
    CHECK_MESSAGE(read_text(out / name) == read_text(out2 / name), name);
  // fit.json differs only in the out_dir provenance; normalize and compare.
  json a = json::parse(read_text(out / "fit.json"));
  json b = json::parse(read_text(out2 / "fit.json"));
  a["config"]["out_dir"] = b["config"]["out_dir"] = "";
  CHECK(a == b);
}

TEST_CASE("report runs the full battery and is reproducible") {
  const fs::path dir = tmp_root() / "report";
  const fs::path out = dir / "out";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.json";
  write_text(cfg_path, base_config(out).dump(2) + "\n");
  const RunConfig cfg = load_run_config(cfg_path.string());
  REQUIRE(run_command("report", cfg) == 0);

  for (const char* name :
       {"fit.json", "robustness.json", "decomposition.json", "bsts.json",
        "placebo_gaps.csv", "ratios.csv", "pvalues.csv", "cv_candidates.csv",
        "jackknife.csv", "trends.csv", "decomposition.csv", "bsts_summary.csv",
        "bsts_inclusion.csv", "placebo_gaps.svg", "decomposition.svg", "bsts.svg",
        "report.md"})
    CHECK_MESSAGE(fs::exists(out / name), name);

  const std::string report = read_text(out / "report.md");
  CHECK(report.find("## Fit") != std::string::npos);
  CHECK(report.find("## Robustness") != std::string::npos);
  CHECK(report.find("## Shortfall decomposition") != std::string::npos);
  CHECK(report.find("## Structural time-series counterfactual") != std::string::npos);
  CHECK(report.find("nan") == std::string::npos);

  // The robustness JSON reflects the placebo year we configured.
  const json rob = json::parse(read_text(out / "robustness.json"));
  REQUIRE(rob["summary"].contains("in_time"));
  CHECK(rob["summary"]["in_time"].size() == 1);
  CHECK(rob["summary"]["in_time"][0]["placebo_year"] == 2002);
  CHECK(fs::exists(out / "in_time_2002.csv"));

  // The BSTS summary covers the fit and post windows: the fit runs through
  // the treatment year, the forecast covers the remaining panel years.
  const json bsts = json::parse(read_text(out / "bsts.json"));
  CHECK(bsts["summary"]["fit_window"] == json({1994, 2009}));
  CHECK(bsts["summary"]["post_window"] == json({2010, 2015}));
  CHECK(bsts["summary"]["kept_draws"] == 250);

  // Full rerun into a second directory: every artifact byte-identical except
  // for the provenance out_dir inside the JSON blocks.
  const fs::path out2 = dir / "out2";
  RunConfig cfg2 = cfg;
  cfg2.out_dir = out2.string();
  REQUIRE(run_command("report", cfg2) == 0);
  std::size_t n_compared = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    const std::string name = entry.path().filename().string();
    const std::string x = read_text(entry.path());
    const std::string y = read_text(out2 / name);
    if (entry.path().extension() == ".json") {
      json ja = json::parse(x), jb = json::parse(y);
      ja["config"]["out_dir"] = jb["config"]["out_dir"] = "";
      CHECK_MESSAGE(ja == jb, name);
    } else {
      CHECK_MESSAGE(x == y, name);
    }
    ++n_compared;
  }
  CHECK(n_compared >= 17);
}

TEST_CASE("SVG artifacts are structurally sane") {
  // Reuse the fit output from the fit-artifacts test directory if present;
  // otherwise produce it.
  const fs::path out = tmp_root() / "fit" / "out";
  if (!fs::exists(out / "fit_paths.svg")) {
    const fs::path dir = tmp_root() / "fit";
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "run.json";
    write_text(cfg_path, base_config(out).dump(2) + "\n");
    REQUIRE(run_command("fit", load_run_config(cfg_path.string())) == 0);
  }
  for (const char* name : {"fit_paths.svg", "gap.svg"}) {
    const std::string svg = read_text(out / name);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<path") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(svg.find("inf") == std::string::npos);
  }
}

TEST_CASE("resolved config serialization is stable") {
  const fs::path dir = tmp_root() / "ser";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.json";
  write_text(cfg_path, base_config(dir / "out").dump(2) + "\n");
  const RunConfig cfg = load_run_config(cfg_path.string());
  const std::string a = run_config_to_json(cfg);
  const std::string b = run_config_to_json(cfg);
  CHECK(a == b);
  const json j = json::parse(a);
  CHECK(j["treated"] == "T00");
  CHECK(j["bsts"]["n_draws"] == 400);
  CHECK(j["robustness"]["placebo_years"][0] == 2002);
}
