#pragma once

// Pipeline orchestration shared by the CLI and by tests: each cmd_* loads
// inputs, runs the corresponding estimators, and writes artifacts into the
// configured output directory.  All artifacts embed the resolved RunConfig.
//
// Errors surface as exceptions: ValidationError -> exit 1, NumericalError /
// other failures -> exit 2 (mapped by the CLI front end).

#include <string>

#include "synthcf/robustness.hpp"
#include "synthcf/run_config.hpp"
#include "synthcf/trend.hpp"

namespace synthcf {

// Library-level entry points (also used by cmd_*; artifacts are written only
// by the cmd_* wrappers).
ScmFit run_fit(const Panel& panel, const RunConfig& cfg);
StudySpec make_study(const Panel& panel, const RunConfig& cfg);

void cmd_fit(const RunConfig& cfg);
void cmd_robustness(const RunConfig& cfg);
void cmd_decompose(const RunConfig& cfg);
void cmd_bsts(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);  // fit + robustness + decompose + bsts

// Maps an exception (or success) to the documented exit codes.
int run_command(const std::string& name, const RunConfig& cfg);

}  // namespace synthcf
