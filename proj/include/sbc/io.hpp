#pragma once

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sbc/estimators.hpp"
#include "sbc/hamilton_filter.hpp"
#include "sbc/simulation.hpp"

namespace sbc::io {

using json = nlohmann::ordered_json;

/// Shortest decimal that round-trips to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

/// Value rounded to 12 significant digits, for JSON reports.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

/// Fixed four-decimal formatting used by the simulation table.
inline std::string format_ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Write `content` to a sibling temp file and rename it into place.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorCode::IoFailure, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw Error(ErrorCode::IoFailure, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

// --------------------------------------------------------------------------
// Panel CSV: long format, header `unit,period,value`.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <class T>
T parse_number(const std::string& text, int line_no, std::string_view what) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": cannot parse " +
                                             std::string(what) + " '" + text + "'");
  }
  return value;
}

}  // namespace detail

/// Parse a long-format panel, moving the treated unit to index 1.
inline PanelData parse_panel_csv(std::istream& in, const std::string& treated_label, int t0_label) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedCsv, "empty panel file");
  if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (detail::trim(line) != "unit,period,value") {
    throw Error(ErrorCode::MalformedCsv, "header must be exactly 'unit,period,value', got '" +
                                             detail::trim(line) + "'");
  }

  std::vector<std::string> unit_order;
  std::map<std::string, std::map<int, double>> cells;
  std::set<int> periods;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    if (fields.size() != 3) {
      throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const auto& unit = fields[0];
    const int period = detail::parse_number<int>(fields[1], line_no, "period");
    const double value = detail::parse_number<double>(fields[2], line_no, "value");
    auto [it, fresh] = cells.try_emplace(unit);
    if (fresh) unit_order.push_back(unit);
    if (!it->second.emplace(period, value).second) {
      throw Error(ErrorCode::DuplicateCell,
                  "duplicate cell (" + unit + ", " + std::to_string(period) + ")");
    }
    periods.insert(period);
  }
  if (cells.empty()) throw Error(ErrorCode::MalformedCsv, "panel file has no data rows");

  const int first = *periods.begin();
  const int last = *periods.rbegin();
  if (last - first + 1 != static_cast<int>(periods.size())) {
    std::string gaps;
    for (int p = first; p <= last; ++p) {
      if (!periods.count(p)) gaps += (gaps.empty() ? "" : ", ") + std::to_string(p);
    }
    throw Error(ErrorCode::NonContiguousPeriods, "periods missing from the panel: " + gaps);
  }

  std::vector<std::string> missing;
  for (const auto& unit : unit_order) {
    for (int p : periods) {
      if (!cells[unit].count(p)) missing.push_back("(" + unit + ", " + std::to_string(p) + ")");
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::UnbalancedPanel, "missing cells: " + list);
  }

  const auto treated_it = std::find(unit_order.begin(), unit_order.end(), treated_label);
  if (treated_it == unit_order.end()) {
    throw Error(ErrorCode::UnknownTreatedLabel, "treated unit '" + treated_label + "' not in panel");
  }
  if (!periods.count(t0_label)) {
    throw Error(ErrorCode::UnknownPeriodLabel, "treatment period " + std::to_string(t0_label) +
                                                   " outside " + std::to_string(first) + ".." +
                                                   std::to_string(last));
  }

  std::vector<std::string> labels{treated_label};
  for (const auto& unit : unit_order) {
    if (unit != treated_label) labels.push_back(unit);
  }
  const int n_periods = static_cast<int>(periods.size());
  Matrix outcomes(static_cast<Eigen::Index>(labels.size()), n_periods);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& row = cells[labels[i]];
    int k = 0;
    for (const auto& [period, value] : row) outcomes(static_cast<Eigen::Index>(i), k++) = value;
  }
  std::vector<int> period_labels(periods.begin(), periods.end());
  return PanelData(std::move(outcomes), 1, t0_label - first + 1, std::move(labels), std::move(period_labels));
}

inline PanelData load_panel_csv(const std::filesystem::path& path, const std::string& treated_label,
                                int t0_label) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open panel file " + path.string());
  return parse_panel_csv(in, treated_label, t0_label);
}

inline std::string panel_to_csv(const PanelData& panel) {
  std::string out = "unit,period,value\n";
  for (int i = 0; i < panel.units(); ++i) {
    for (int t = 0; t < panel.periods(); ++t) {
      out += panel.unit_labels()[static_cast<std::size_t>(i)] + "," +
             std::to_string(panel.period_labels()[static_cast<std::size_t>(t)]) + "," +
             format_exact(panel.outcomes()(i, t)) + "\n";
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Outputs.

/**
 * `unit,period,observed,trend,cycle` for every unit and period. Trend and
 * cycle are blank before h+p; after t0 they use the pre-treatment
 * coefficients on observed lags.
 */
inline std::string decomposition_csv(const PanelData& panel, const FilterSpec& spec) {
  const auto fits = decompose_panel(panel, spec);
  std::string out = "unit,period,observed,trend,cycle\n";
  for (const auto& fit : fits) {
    const Vector series = panel.series(fit.unit);
    for (int t = 1; t <= panel.periods(); ++t) {
      out += panel.unit_labels()[static_cast<std::size_t>(fit.unit - 1)] + "," +
             std::to_string(panel.period_labels()[static_cast<std::size_t>(t - 1)]) + "," +
             format_exact(series(t - 1)) + ",";
      if (t >= spec.h + spec.p) {
        const double trend = t <= panel.t0() ? fit.trend(t - fit.window.first_fit_period)
                                             : project_trend(fit.alpha, series, t, spec);
        const double cycle = t <= panel.t0() ? fit.cycle(t - fit.window.first_fit_period)
                                             : series(t - 1) - trend;
        out += format_exact(trend) + "," + format_exact(cycle);
      } else {
        out += ",";
      }
      out += "\n";
    }
  }
  return out;
}

inline json regime_json(const WeightRegime& regime) {
  json j;
  j["variant"] = std::string(to_string(regime.variant));
  j["include_intercept"] = regime.include_intercept;
  return j;
}

inline json report_json(const CounterfactualReport& report, const PanelData& panel) {
  json j;
  j["method"] = std::string(to_string(report.method));
  j["regime"] = regime_json(report.regime);
  const int t0_label = panel.period_labels()[static_cast<std::size_t>(report.t0 - 1)];
  j["t0_period"] = t0_label;
  j["fit_window"] = {panel.period_labels()[static_cast<std::size_t>(report.window.first_fit_period - 1)], t0_label};

  json weights = json::object();
  const auto donors = panel.donor_labels();
  for (std::size_t k = 0; k < donors.size(); ++k) {
    weights[donors[k]] = round12(report.weights.weights(static_cast<Eigen::Index>(k)));
  }
  j["weights"] = weights;
  j["intercept"] = report.weights.intercept ? json(round12(*report.weights.intercept)) : json(nullptr);

  json effects = json::array();
  for (int k = 0; k < report.horizon(); ++k) {
    json row;
    row["period"] = t0_label + k + 1;
    row["actual"] = round12(report.post_actual(k));
    row["counterfactual"] = round12(report.post_counterfactual(k));
    row["effect"] = round12(report.effects(k));
    effects.push_back(row);
  }
  j["effects"] = effects;

  json stats;
  stats["pre_mse"] = round12(report.pre_mse);
  stats["objective"] = round12(report.weights.objective);
  stats["kkt_residual"] = round12(report.weights.kkt_residual);
  stats["iterations"] = report.weights.iterations;
  stats["hit_max_iterations"] = report.weights.hit_max_iterations;
  stats["collinear"] = report.weights.collinear;
  stats["effective_size"] = report.window.effective_size;
  j["fit"] = stats;
  return j;
}

inline std::string estimate_report_json(const PanelData& panel, const FilterSpec& spec,
                                        const CounterfactualReport& sc, const CounterfactualReport& sbc,
                                        std::string_view kind) {
  json j;
  j["kind"] = std::string(kind);
  j["treated"] = panel.unit_labels()[static_cast<std::size_t>(panel.treated_unit() - 1)];
  j["filter"] = {{"h", spec.h}, {"p", spec.p}};
  j["reports"] = json::array({report_json(sc, panel), report_json(sbc, panel)});
  return j.dump(2) + "\n";
}

/**
 * `period,actual,counterfactual_sc,counterfactual_sbc,effect_sc,effect_sbc`.
 * Pre-treatment rows carry fitted values; rows outside both paths are blank.
 */
inline std::string series_csv(const PanelData& panel, const CounterfactualReport& sc,
                              const CounterfactualReport& sbc) {
  std::string out = "period,actual,counterfactual_sc,counterfactual_sbc,effect_sc,effect_sbc\n";
  const Vector actual = panel.treated_series();
  const int first = sc.window.first_fit_period;
  auto value_at = [](const CounterfactualReport& r, int t) -> std::optional<double> {
    if (t >= r.window.first_fit_period && t <= r.t0) return r.pre_fitted(t - r.window.first_fit_period);
    if (t > r.t0 && t <= r.t0 + r.horizon()) return r.post_counterfactual(t - r.t0 - 1);
    return std::nullopt;
  };
  auto cell = [](std::optional<double> v) { return v ? format_exact(*v) : std::string(); };
  const int last = std::max(sc.t0 + sc.horizon(), sbc.t0 + sbc.horizon());
  for (int t = first; t <= last; ++t) {
    const auto csc = value_at(sc, t);
    const auto csbc = value_at(sbc, t);
    const double y = actual(t - 1);
    std::optional<double> esc, esbc;
    if (csc) esc = y - *csc;
    if (csbc) esbc = y - *csbc;
    out += std::to_string(panel.period_labels()[static_cast<std::size_t>(t - 1)]) + "," + format_exact(y) +
           "," + cell(csc) + "," + cell(csbc) + "," + cell(esc) + "," + cell(esbc) + "\n";
  }
  return out;
}

/// Grouped-bar data: `donor,w_raw,w_trend,w_cycle`.
inline std::string weights_csv(const WeightComparison& cmp) {
  std::string out = "donor,w_raw,w_trend,w_cycle\n";
  for (std::size_t k = 0; k < cmp.donors.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out += cmp.donors[k] + "," + format_exact(cmp.raw.weights(i)) + "," +
           format_exact(cmp.trend.weights(i)) + "," + format_exact(cmp.cycle.weights(i)) + "\n";
  }
  return out;
}

inline std::string table_header() { return "model,regime,parameter,t0,pre,post\n"; }

inline std::string table_row(const sim::MseRatioReport& report) {
  const auto& s = report.spec;
  return std::string(sim::to_string(s.model)) + "," + std::string(to_string(s.regime.variant)) + "," +
         s.parameter_label() + "," + std::to_string(s.t0) + "," + format_ratio(report.pre_ratio) + "," +
         format_ratio(report.post_ratio) + "\n";
}

inline json simulation_spec_json(const sim::SimulationSpec& s) {
  json j;
  j["model"] = std::string(sim::to_string(s.model));
  j["n_units"] = s.n_units;
  j["t0"] = s.t0;
  j["h"] = s.h;
  j["p"] = s.p;
  j["drift"] = std::string(sim::to_string(s.drift));
  j["drift_value"] = s.drift_value;
  j["phi"] = s.phi;
  j["loading_scale"] = std::string(sim::to_string(s.loading_scale));
  j["regime"] = regime_json(s.regime);
  j["replications"] = s.replications;
  j["master_seed"] = s.master_seed;
  return j;
}

inline std::string manifest_json(const sim::MseRatioReport& report, double wall_seconds, int threads) {
  json j;
  j["spec"] = simulation_spec_json(report.spec);
  j["seed"] = report.spec.master_seed;
  j["completed"] = report.completed;
  j["failures"] = report.failures;
  j["pre_ratio"] = round12(report.pre_ratio);
  j["post_ratio"] = round12(report.post_ratio);
  j["median_pre_ratio"] = round12(report.median_pre_ratio);
  j["median_post_ratio"] = round12(report.median_post_ratio);
  j["sbc_post_bias_mean"] = round12(report.sbc_bias_mean);
  j["sbc_post_bias_se"] = round12(report.sbc_bias_se);
  j["threads"] = threads;
  j["wall_time_seconds"] = round12(wall_seconds);
  return j.dump(2) + "\n";
}

}  // namespace sbc::io
