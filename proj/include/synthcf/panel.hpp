#pragma once

// Country-year panel store: ingestion, validation, alignment, and the
// predictor/outcome matrices every estimator consumes.
//
// Canonical on-disk format is long CSV `unit,variable,year,value` (UTF-8,
// '.' decimal separator).  A schema mapping allows alternative column names.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthcf/errors.hpp"

namespace synthcf {

struct Panel {
  std::vector<std::string> units;      // sorted, unique
  std::vector<std::string> variables;  // sorted, unique (the registry)
  int first_year = 0;
  int last_year = -1;  // years are the contiguous range [first_year, last_year]

  // Dense storage indexed [unit][variable][year - first_year]; missing = NaN.
  std::vector<std::vector<std::vector<double>>> values;

  int n_years() const { return last_year - first_year + 1; }
  int unit_index(const std::string& unit) const;          // -1 if absent
  int variable_index(const std::string& variable) const;  // -1 if absent
  bool has(const std::string& unit, const std::string& variable, int year) const;
  double value(const std::string& unit, const std::string& variable, int year) const;
  void set(const std::string& unit, const std::string& variable, int year, double v);

  // Series over an inclusive year window; throws if any value is missing.
  Eigen::VectorXd series(const std::string& unit, const std::string& variable,
                         int year_from, int year_to) const;

  // True when the unit has every registry variable for every year in window.
  bool complete(const std::string& unit, int year_from, int year_to) const;
  std::vector<std::string> missing_entries(const std::string& unit, int year_from,
                                           int year_to, int max_items = 8) const;
};

struct SchemaMapping {
  std::string unit = "unit";
  std::string variable = "variable";
  std::string year = "year";
  std::string value = "value";
};

// Per-unit completeness verdicts for a window, emitted as the validation report.
struct ValidationReport {
  struct Entry {
    std::string unit;
    bool complete = true;
    std::vector<std::string> missing;  // "variable@year" samples
  };
  std::vector<Entry> entries;
  std::vector<std::string> incomplete_units() const;
};

Panel load_panel(const std::string& path, const SchemaMapping& schema = {});
void save_panel(const Panel& panel, const std::string& path);
ValidationReport validate_panel(const Panel& panel, int year_from, int year_to);

struct PredictorSpec {
  std::string variable;
  // Aggregation over the pre-treatment window: mean over the window, or the
  // value at specific years averaged.
  std::vector<int> at_years;  // empty -> mean over the whole window
  bool standardize = true;
};

struct DonorPoolSpec {
  std::string name;  // "group-I" | "group-II" | "custom"
  std::vector<std::string> included;
  std::vector<std::string> excluded;

  void validate(const std::string& treated) const;  // throws ValidationError
};

struct PredictorMatrices {
  Eigen::VectorXd X1;  // k predictors, treated
  Eigen::MatrixXd X0;  // k x J, donors in pool order
  Eigen::VectorXd Z1;  // T0 pre-window outcomes, treated
  Eigen::MatrixXd Z0;  // T0 x J
  std::vector<std::string> donors;
  std::vector<std::string> predictor_names;
  Eigen::VectorXd row_mean;  // standardization applied to each X row
  Eigen::VectorXd row_sd;
  Eigen::VectorXd X1_raw;
  Eigen::MatrixXd X0_raw;
};

PredictorMatrices build_predictor_matrix(const Panel& panel,
                                         const std::vector<PredictorSpec>& specs,
                                         const DonorPoolSpec& pool,
                                         const std::string& treated,
                                         const std::string& outcome_variable,
                                         int pre_from, int pre_to);

// Yearly percent changes g_t = 100*(y_t/y_{t-1} - 1) over [year_from, year_to];
// result has |window| - 1 entries.  Values must be strictly positive.
Eigen::VectorXd growth_rates(const Panel& panel, const std::string& unit,
                             const std::string& variable, int year_from, int year_to);

}  // namespace synthcf
