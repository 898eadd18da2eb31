// Command-line front end: decompose / estimate / placebo / weights over a
// long-format panel CSV, and simulate for the Monte Carlo lab.

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "sbc/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string input;
  std::string output_dir;
  std::string treated;
  std::string regime;
  int t0 = 0;
  int placebo = 0;
  int h = 0;
  int p = 0;
  bool no_intercept = false;
  bool full_horizon = false;

  std::string model;
  std::string drift;
  std::string loading_scale;
  double drift_value = 0.0;
  double phi = 0.0;
  int units = 0;
  int reps = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration; flags override its keys");
  cmd->add_option("-o,--output-dir", f.output_dir, "Directory for output files");
  cmd->add_option("--h", f.h, "Filter horizon h");
  cmd->add_option("--p", f.p, "Number of own lags p");
  cmd->add_option("--regime", f.regime, "Weight regime: unrestricted | signed | nonneg");
  cmd->add_flag("--no-intercept", f.no_intercept, "Drop the intercept in the unrestricted regime");
}

void add_panel(CLI::App* cmd, Flags& f) {
  cmd->add_option("-i,--input", f.input, "Panel CSV with header unit,period,value");
  cmd->add_option("--treated", f.treated, "Label of the treated unit");
  cmd->add_option("--t0", f.t0, "Last pre-treatment period label (e.g. year)");
  cmd->add_flag("--full-horizon", f.full_horizon, "Impute all observed post periods, not just h");
}

sbc::cli::RunConfig build_config(const CLI::App* cmd, const Flags& f) {
  using namespace sbc;
  cli::RunConfig config;
  if (cmd->count("--config")) config = cli::load_config_file(f.config);
  config.command = cli::parse_command(cmd->get_name());

  auto given = [&](const char* name) {
    try {
      return cmd->count(name) > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };
  if (given("--output-dir")) config.output_dir = f.output_dir;
  if (given("--h")) config.filter.h = f.h;
  if (given("--p")) config.filter.p = f.p;
  if (given("--regime")) {
    const auto variant = parse_weight_variant(f.regime);
    config.regime = {variant, variant == WeightVariant::Unrestricted};
  }
  if (given("--no-intercept")) config.regime.include_intercept = false;
  if (given("--input")) config.input_path = f.input;
  if (given("--treated")) config.treated_label = f.treated;
  if (given("--t0") && config.command != cli::Command::Simulate) config.t0_label = f.t0;
  if (given("--placebo")) config.placebo_label = f.placebo;
  if (given("--full-horizon")) config.full_horizon = true;

  if (config.command == cli::Command::Simulate) {
    auto spec = config.sim.value_or(sim::SimulationSpec{});
    spec.regime = config.regime;
    if (given("--model")) spec.model = sim::parse_model(f.model);
    if (given("--units")) spec.n_units = f.units;
    if (given("--t0")) spec.t0 = f.t0;
    if (given("--h")) spec.h = f.h;
    if (given("--p")) spec.p = f.p;
    if (given("--drift")) spec.drift = sim::parse_drift(f.drift);
    if (given("--drift-value")) spec.drift_value = f.drift_value;
    if (given("--phi")) spec.phi = f.phi;
    if (given("--loading-scale")) spec.loading_scale = sim::parse_loading_scale(f.loading_scale);
    if (given("--reps")) spec.replications = f.reps;
    if (given("--seed")) spec.master_seed = f.seed;
    config.sim = spec;
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic business cycle and synthetic control counterfactuals"};
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  app.require_subcommand(1);
  Flags f;

  auto* decompose = app.add_subcommand("decompose", "Write per-unit trend/cycle decomposition.csv");
  auto* estimate = app.add_subcommand("estimate", "SC and SBC counterfactuals: report.json, series.csv, weights.csv");
  auto* placebo = app.add_subcommand("placebo", "Re-run both estimators at an earlier placebo date");
  auto* weights = app.add_subcommand("weights", "Raw / trend / cycle donor weights: weights.csv");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo MSE ratios: table.csv, manifest.json");

  for (auto* cmd : {decompose, estimate, placebo, weights}) {
    add_common(cmd, f);
    add_panel(cmd, f);
  }
  placebo->add_option("--placebo", f.placebo, "Placebo last pre-treatment period label");

  add_common(simulate, f);
  simulate->add_option("--model", f.model, "model1 | model2 | model3");
  simulate->add_option("--units", f.units, "Total number of units N+1");
  simulate->add_option("--t0", f.t0, "Pre-treatment length");
  simulate->add_option("--drift", f.drift, "Model 1 drift: zero | fixed | gaussian");
  simulate->add_option("--drift-value", f.drift_value, "Fixed drift, or sd of the Gaussian drift");
  simulate->add_option("--phi", f.phi, "AR coefficient of the stationary factors");
  simulate->add_option("--loading-scale", f.loading_scale, "Model 3 loading scale read as: variance | sd");
  simulate->add_option("--reps", f.reps, "Number of replications");
  simulate->add_option("--seed", f.seed, "Master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    auto config = build_config(cmd, f);
    const auto result = sbc::cli::run(config);
    for (const auto& path : result.written) std::cout << path.string() << "\n";
    return result.exit_code;
  } catch (const sbc::Error& e) {
    std::cerr << sbc::cli::error_json(e.code(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::cerr << sbc::cli::error_json(sbc::ErrorCode::IoFailure, e.what());
    return 3;
  }
}
