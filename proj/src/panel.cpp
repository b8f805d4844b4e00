#include "synthcf/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace synthcf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

int parse_int(const std::string& s, const std::string& what, int line_no) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    if (!std::isfinite(v))
      throw ValidationError("line " + std::to_string(line_no) + ": non-finite value '" + s + "'");
    return v;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(line_no) + ": bad value '" + s + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

int Panel::unit_index(const std::string& unit) const {
  const auto it = std::lower_bound(units.begin(), units.end(), unit);
  if (it == units.end() || *it != unit) return -1;
  return static_cast<int>(it - units.begin());
}

int Panel::variable_index(const std::string& variable) const {
  const auto it = std::lower_bound(variables.begin(), variables.end(), variable);
  if (it == variables.end() || *it != variable) return -1;
  return static_cast<int>(it - variables.begin());
}

bool Panel::has(const std::string& unit, const std::string& variable, int year) const {
  const int u = unit_index(unit), v = variable_index(variable);
  if (u < 0 || v < 0 || year < first_year || year > last_year) return false;
  return !std::isnan(values[u][v][year - first_year]);
}

double Panel::value(const std::string& unit, const std::string& variable, int year) const {
  const int u = unit_index(unit), v = variable_index(variable);
  if (u < 0) throw ValidationError("unknown unit '" + unit + "'");
  if (v < 0) throw ValidationError("unknown variable '" + variable + "'");
  if (year < first_year || year > last_year)
    throw ValidationError("year " + std::to_string(year) + " outside panel range");
  const double x = values[u][v][year - first_year];
  if (std::isnan(x))
    throw ValidationError("missing value: " + unit + "/" + variable + "@" + std::to_string(year));
  return x;
}

void Panel::set(const std::string& unit, const std::string& variable, int year, double v) {
  const int u = unit_index(unit), vi = variable_index(variable);
  if (u < 0 || vi < 0 || year < first_year || year > last_year)
    throw ValidationError("set: unknown unit/variable/year");
  values[u][vi][year - first_year] = v;
}

Eigen::VectorXd Panel::series(const std::string& unit, const std::string& variable,
                              int year_from, int year_to) const {
  if (year_to < year_from) throw ValidationError("series: empty year window");
  Eigen::VectorXd out(year_to - year_from + 1);
  for (int y = year_from; y <= year_to; ++y) out[y - year_from] = value(unit, variable, y);
  return out;
}

bool Panel::complete(const std::string& unit, int year_from, int year_to) const {
  for (const auto& var : variables)
    for (int y = year_from; y <= year_to; ++y)
      if (!has(unit, var, y)) return false;
  return true;
}

std::vector<std::string> Panel::missing_entries(const std::string& unit, int year_from,
                                                int year_to, int max_items) const {
  std::vector<std::string> out;
  for (const auto& var : variables)
    for (int y = year_from; y <= year_to; ++y)
      if (!has(unit, var, y)) {
        out.push_back(var + "@" + std::to_string(y));
        if (static_cast<int>(out.size()) >= max_items) return out;
      }
  return out;
}

std::vector<std::string> ValidationReport::incomplete_units() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (!e.complete) out.push_back(e.unit);
  return out;
}

Panel load_panel(const std::string& path, const SchemaMapping& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty panel file '" + path + "'");
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("panel header missing column '" + name + "' in '" + path + "'");
    return static_cast<int>(it - header.begin());
  };
  const int cu = col(schema.unit), cv = col(schema.variable), cy = col(schema.year),
            cval = col(schema.value);
  const int min_cols = std::max({cu, cv, cy, cval}) + 1;

  struct Row {
    std::string unit, variable;
    int year;
    double value;
  };
  std::vector<Row> rows;
  std::set<std::string> units, variables;
  int ymin = std::numeric_limits<int>::max(), ymax = std::numeric_limits<int>::min();

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<int>(f.size()) < min_cols)
      throw ValidationError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(min_cols) + " columns, got " +
                            std::to_string(f.size()));
    Row r;
    r.unit = f[cu];
    r.variable = f[cv];
    if (r.unit.empty() || r.variable.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty unit or variable");
    r.year = parse_int(f[cy], "year", line_no);
    r.value = parse_double(f[cval], line_no);
    units.insert(r.unit);
    variables.insert(r.variable);
    ymin = std::min(ymin, r.year);
    ymax = std::max(ymax, r.year);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("no data rows in '" + path + "'");

  Panel p;
  p.units.assign(units.begin(), units.end());
  p.variables.assign(variables.begin(), variables.end());
  p.first_year = ymin;
  p.last_year = ymax;
  p.values.assign(p.units.size(),
                  std::vector<std::vector<double>>(
                      p.variables.size(), std::vector<double>(p.n_years(), kNaN)));

  for (const auto& r : rows) {
    const int u = p.unit_index(r.unit), v = p.variable_index(r.variable);
    double& slot = p.values[u][v][r.year - ymin];
    if (!std::isnan(slot))
      throw ValidationError("duplicate entry " + r.unit + "/" + r.variable + "@" +
                            std::to_string(r.year));
    slot = r.value;
  }
  return p;
}

void save_panel(const Panel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write panel file '" + path + "'");
  out << "unit,variable,year,value\n";
  for (const auto& u : panel.units)
    for (const auto& v : panel.variables)
      for (int y = panel.first_year; y <= panel.last_year; ++y)
        if (panel.has(u, v, y))
          out << u << ',' << v << ',' << y << ',' << format_double(panel.value(u, v, y))
              << '\n';
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

ValidationReport validate_panel(const Panel& panel, int year_from, int year_to) {
  ValidationReport rep;
  for (const auto& u : panel.units) {
    ValidationReport::Entry e;
    e.unit = u;
    e.complete = panel.complete(u, year_from, year_to);
    if (!e.complete) e.missing = panel.missing_entries(u, year_from, year_to);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

void DonorPoolSpec::validate(const std::string& treated) const {
  if (included.size() < 2) throw ValidationError("donor pool needs at least 2 units");
  std::set<std::string> inc(included.begin(), included.end());
  if (inc.size() != included.size()) throw ValidationError("donor pool has duplicate units");
  if (inc.count(treated))
    throw ValidationError("treated unit '" + treated + "' cannot be in its own donor pool");
  for (const auto& e : excluded)
    if (inc.count(e))
      throw ValidationError("unit '" + e + "' is both included and excluded");
}

PredictorMatrices build_predictor_matrix(const Panel& panel,
                                         const std::vector<PredictorSpec>& specs,
                                         const DonorPoolSpec& pool,
                                         const std::string& treated,
                                         const std::string& outcome_variable,
                                         int pre_from, int pre_to) {
  if (specs.empty()) throw ValidationError("need at least one predictor");
  if (pre_to < pre_from) throw ValidationError("empty pre-treatment window");
  pool.validate(treated);
  if (panel.unit_index(treated) < 0)
    throw ValidationError("treated unit '" + treated + "' not in panel");

  const int k = static_cast<int>(specs.size());
  const int J = static_cast<int>(pool.included.size());
  const int T0 = pre_to - pre_from + 1;

  auto aggregate = [&](const std::string& unit, const PredictorSpec& s) {
    double sum = 0.0;
    int n = 0;
    if (s.at_years.empty()) {
      for (int y = pre_from; y <= pre_to; ++y) {
        if (!panel.has(unit, s.variable, y))
          throw ValidationError("predictor '" + s.variable + "' missing for unit '" + unit +
                                "' at " + std::to_string(y));
        sum += panel.value(unit, s.variable, y);
        ++n;
      }
    } else {
      for (int y : s.at_years) {
        if (y < pre_from || y > pre_to)
          throw ValidationError("predictor '" + s.variable + "' aggregation year " +
                                std::to_string(y) + " outside pre-treatment window");
        if (!panel.has(unit, s.variable, y))
          throw ValidationError("predictor '" + s.variable + "' missing for unit '" + unit +
                                "' at " + std::to_string(y));
        sum += panel.value(unit, s.variable, y);
        ++n;
      }
    }
    return sum / n;
  };

  PredictorMatrices m;
  m.donors = pool.included;
  m.X1.resize(k);
  m.X0.resize(k, J);
  m.Z1.resize(T0);
  m.Z0.resize(T0, J);
  m.row_mean = Eigen::VectorXd::Zero(k);
  m.row_sd = Eigen::VectorXd::Ones(k);
  for (const auto& s : specs) m.predictor_names.push_back(s.variable);

  for (int i = 0; i < k; ++i) {
    m.X1[i] = aggregate(treated, specs[i]);
    for (int j = 0; j < J; ++j) m.X0(i, j) = aggregate(pool.included[j], specs[i]);
  }
  m.X1_raw = m.X1;
  m.X0_raw = m.X0;

  m.Z1 = panel.series(treated, outcome_variable, pre_from, pre_to);
  for (int j = 0; j < J; ++j)
    m.Z0.col(j) = panel.series(pool.included[j], outcome_variable, pre_from, pre_to);

  // z-score each predictor row across treated + donors.
  for (int i = 0; i < k; ++i) {
    if (!specs[i].standardize) continue;
    const int n = J + 1;
    double mean = m.X1[i];
    for (int j = 0; j < J; ++j) mean += m.X0(i, j);
    mean /= n;
    double ss = (m.X1[i] - mean) * (m.X1[i] - mean);
    for (int j = 0; j < J; ++j) ss += (m.X0(i, j) - mean) * (m.X0(i, j) - mean);
    const double var = ss / (n - 1);
    if (!(var > 0.0))
      throw ValidationError("predictor '" + specs[i].variable +
                            "' has zero variance across units; cannot standardize");
    const double sd = std::sqrt(var);
    m.row_mean[i] = mean;
    m.row_sd[i] = sd;
    m.X1[i] = (m.X1[i] - mean) / sd;
    for (int j = 0; j < J; ++j) m.X0(i, j) = (m.X0(i, j) - mean) / sd;
  }
  return m;
}

Eigen::VectorXd growth_rates(const Panel& panel, const std::string& unit,
                             const std::string& variable, int year_from, int year_to) {
  if (year_to <= year_from)
    throw ValidationError("growth_rates: window must span at least two years");
  const Eigen::VectorXd y = panel.series(unit, variable, year_from, year_to);
  if ((y.array() <= 0.0).any())
    throw ValidationError("growth_rates: nonpositive value in '" + unit + "/" + variable +
                          "'; growth undefined");
  Eigen::VectorXd g(y.size() - 1);
  for (int i = 1; i < y.size(); ++i) g[i - 1] = 100.0 * (y[i] / y[i - 1] - 1.0);
  return g;
}

}  // namespace synthcf
