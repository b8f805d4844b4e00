// synthcf: synthetic-control and structural time-series policy evaluation.
//
// Usage: synthcf <command> <config.json> [overrides]
// Commands: fit, robustness, decompose, bsts, simulate, report.
// Exit codes: 0 success, 1 invalid input/configuration, 2 numerical failure.

#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "synthcf/errors.hpp"
#include "synthcf/pipeline.hpp"
#include "synthcf/run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-control policy evaluation pipeline"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string panel, treated, out;
    int treatment_year = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
  };

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "Estimate the synthetic control and write fit artifacts"},
      {"robustness", "Placebo, significance, jackknife, and cross-validation battery"},
      {"decompose", "Trend and shortfall decomposition against a potential-output path"},
      {"bsts", "Bayesian structural time-series counterfactual"},
      {"simulate", "Generate a synthetic benchmark panel with known truth"},
      {"report", "Run the full pipeline and write a combined report"}};

  std::vector<std::shared_ptr<Args>> args_per_cmd;
  for (const auto& [name, help] : commands) {
    auto args = std::make_shared<Args>();
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", args->config, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--panel", args->panel, "Override the panel CSV path");
    sub->add_option("--treated", args->treated, "Override the treated unit");
    sub->add_option("--treatment-year", args->treatment_year, "Override the treatment year");
    sub->add_option("--seed", args->seed, "Override the RNG seed")
        ->each([args](const std::string&) { args->seed_set = true; });
    sub->add_option("--out", args->out, "Output directory (beats config and " +
                                            std::string(synthcf::kOutDirEnvVar) + ")");
    sub->add_option("--jobs", args->jobs, "Worker threads for placebo/jackknife batteries");
    args_per_cmd.push_back(std::move(args));
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < commands.size(); ++i) {
    const CLI::App* sub = app.get_subcommand(commands[i].first);
    if (!sub->parsed()) continue;
    const Args& a = *args_per_cmd[i];

    synthcf::ConfigOverrides ov;
    if (!a.panel.empty()) ov.panel = a.panel;
    if (!a.treated.empty()) ov.treated = a.treated;
    if (a.treatment_year != 0) ov.treatment_year = a.treatment_year;
    if (a.seed_set) ov.seed = a.seed;
    if (!a.out.empty()) ov.out = a.out;
    if (a.jobs != 0) ov.jobs = a.jobs;

    synthcf::RunConfig cfg;
    try {
      cfg = synthcf::load_run_config(a.config, ov);
    } catch (const synthcf::ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    return synthcf::run_command(commands[i].first, cfg);
  }
  return 1;  // unreachable: a subcommand is required
}
