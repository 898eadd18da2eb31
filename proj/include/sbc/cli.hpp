#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbc/io.hpp"

namespace sbc::cli {

enum class Command { Decompose, Estimate, Placebo, Simulate, Weights };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::Decompose: return "decompose";
    case Command::Estimate: return "estimate";
    case Command::Placebo: return "placebo";
    case Command::Simulate: return "simulate";
    case Command::Weights: return "weights";
  }
  return "unknown";
}

inline Command parse_command(std::string_view s) {
  if (s == "decompose") return Command::Decompose;
  if (s == "estimate") return Command::Estimate;
  if (s == "placebo") return Command::Placebo;
  if (s == "simulate") return Command::Simulate;
  if (s == "weights") return Command::Weights;
  throw Error(ErrorCode::InvalidConfig, "unknown command '" + std::string(s) + "'");
}

struct RunConfig {
  Command command = Command::Estimate;
  std::optional<std::filesystem::path> input_path;
  FilterSpec filter{4, 2};
  WeightRegime regime = WeightRegime::simplex();
  std::string treated_label;
  std::optional<int> t0_label;
  std::optional<int> placebo_label;
  std::optional<sim::SimulationSpec> sim;
  std::filesystem::path output_dir = ".";
  /// Impute every observed post-treatment period instead of stopping at h.
  bool full_horizon = false;
  /// Simulation workers; 0 means SBC_THREADS or the hardware count.
  int threads = 0;

  void validate() const {
    filter.validate();
    regime.validate();
    const bool needs_panel = command != Command::Simulate;
    if (needs_panel) {
      if (!input_path) throw Error(ErrorCode::InvalidConfig, std::string(to_string(command)) + " requires an input panel");
      if (treated_label.empty()) throw Error(ErrorCode::InvalidConfig, "treated unit label is required");
      if (!t0_label) throw Error(ErrorCode::InvalidConfig, "treatment period (t0) is required");
    }
    if (command == Command::Placebo) {
      if (!placebo_label) throw Error(ErrorCode::InvalidConfig, "placebo requires a placebo period");
      if (*placebo_label >= *t0_label) {
        throw Error(ErrorCode::InvalidConfig, "placebo period " + std::to_string(*placebo_label) +
                                                  " must precede t0 " + std::to_string(*t0_label));
      }
    }
    if (command == Command::Simulate) {
      if (!sim) throw Error(ErrorCode::InvalidConfig, "simulate requires a simulation spec");
      sim->validate();
    }
  }
};

/**
 * Overlay keys of a JSON config document onto `config`. Unknown keys are
 * rejected so typos do not silently fall back to defaults.
 */
inline void apply_json(RunConfig& config, const nlohmann::json& doc) {
  static const std::vector<std::string> known = {
      "command", "input", "h", "p", "regime", "intercept", "treated", "t0", "placebo",
      "output_dir", "full_horizon", "threads", "simulation"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
  }
  try {
    if (doc.contains("command")) config.command = parse_command(doc["command"].get<std::string>());
    if (doc.contains("input")) config.input_path = doc["input"].get<std::string>();
    if (doc.contains("h")) config.filter.h = doc["h"].get<int>();
    if (doc.contains("p")) config.filter.p = doc["p"].get<int>();
    if (doc.contains("regime")) {
      const auto variant = parse_weight_variant(doc["regime"].get<std::string>());
      config.regime = {variant, variant == WeightVariant::Unrestricted};
    }
    if (doc.contains("intercept")) config.regime.include_intercept = doc["intercept"].get<bool>();
    if (doc.contains("treated")) config.treated_label = doc["treated"].get<std::string>();
    if (doc.contains("t0")) config.t0_label = doc["t0"].get<int>();
    if (doc.contains("placebo")) config.placebo_label = doc["placebo"].get<int>();
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("full_horizon")) config.full_horizon = doc["full_horizon"].get<bool>();
    if (doc.contains("threads")) config.threads = doc["threads"].get<int>();
    if (doc.contains("simulation")) {
      const auto& s = doc["simulation"];
      sim::SimulationSpec spec = config.sim.value_or(sim::SimulationSpec{});
      if (s.contains("model")) spec.model = sim::parse_model(s["model"].get<std::string>());
      if (s.contains("n_units")) spec.n_units = s["n_units"].get<int>();
      if (s.contains("t0")) spec.t0 = s["t0"].get<int>();
      if (s.contains("h")) spec.h = s["h"].get<int>();
      if (s.contains("p")) spec.p = s["p"].get<int>();
      if (s.contains("drift")) spec.drift = sim::parse_drift(s["drift"].get<std::string>());
      if (s.contains("drift_value")) spec.drift_value = s["drift_value"].get<double>();
      if (s.contains("phi")) spec.phi = s["phi"].get<double>();
      if (s.contains("loading_scale")) {
        spec.loading_scale = sim::parse_loading_scale(s["loading_scale"].get<std::string>());
      }
      if (s.contains("replications")) spec.replications = s["replications"].get<int>();
      if (s.contains("seed")) spec.master_seed = s["seed"].get<std::uint64_t>();
      config.sim = spec;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig config;
  apply_json(config, doc);
  return config;
}

inline std::string error_json(ErrorCode code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"]["code"] = std::string(to_string(code));
  j["error"]["message"] = std::string(message);
  return j.dump() + "\n";
}

struct RunResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> written;
};

namespace detail {

inline void emit(RunResult& result, const std::filesystem::path& path, std::string_view content) {
  io::write_atomic(path, content);
  result.written.push_back(path);
}

inline void emit_estimate(RunResult& result, const RunConfig& config, const PanelData& panel,
                          const CounterfactualReport& sc, const CounterfactualReport& sbc,
                          std::string_view kind) {
  const auto& dir = config.output_dir;
  emit(result, dir / "report.json", io::estimate_report_json(panel, config.filter, sc, sbc, kind));
  emit(result, dir / "series.csv", io::series_csv(panel, sc, sbc));
  emit(result, dir / "weights.csv", io::weights_csv(weight_comparison(panel, config.filter, config.regime)));
}

}  // namespace detail

/// Execute one subcommand. Module errors propagate as sbc::Error.
inline RunResult run(const RunConfig& config) {
  config.validate();
  RunResult result;
  const auto& dir = config.output_dir;

  if (config.command == Command::Simulate) {
    const auto start = std::chrono::steady_clock::now();
    const int threads = config.threads > 0 ? config.threads : sim::default_threads();
    const auto report = sim::run_monte_carlo(*config.sim, threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail::emit(result, dir / "table.csv", io::table_header() + io::table_row(report));
    detail::emit(result, dir / "manifest.json", io::manifest_json(report, wall, threads));
    return result;
  }

  const PanelData panel = io::load_panel_csv(*config.input_path, config.treated_label, *config.t0_label);
  switch (config.command) {
    case Command::Decompose:
      validate_panel(panel, config.filter);
      detail::emit(result, dir / "decomposition.csv", io::decomposition_csv(panel, config.filter));
      break;
    case Command::Estimate: {
      EstimateOptions opts;
      if (config.full_horizon) opts.horizon = panel.periods() - panel.t0();
      const auto sc = sc_estimate(panel, config.filter, config.regime, opts);
      const auto sbc = sbc_estimate(panel, config.filter, config.regime, opts);
      detail::emit_estimate(result, config, panel, sc, sbc, "estimate");
      break;
    }
    case Command::Placebo: {
      const int first_label = panel.period_labels().front();
      const int placebo_t0 = *config.placebo_label - first_label + 1;
      if (placebo_t0 < 1) {
        throw Error(ErrorCode::UnknownPeriodLabel, "placebo period precedes the panel");
      }
      EstimateOptions opts;
      if (config.full_horizon) opts.horizon = panel.t0() - placebo_t0;
      const auto placebo = placebo_run(panel, placebo_t0, config.filter, config.regime, opts);
      const PanelData shifted = panel.with_t0(placebo_t0);
      detail::emit_estimate(result, config, shifted, placebo.sc, placebo.sbc, "placebo");
      break;
    }
    case Command::Weights:
      detail::emit(result, dir / "weights.csv",
                   io::weights_csv(weight_comparison(panel, config.filter, config.regime)));
      break;
    case Command::Simulate:
      break;
  }
  return result;
}

}  // namespace sbc::cli
