#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sbc/hamilton_filter.hpp"
#include "sbc/weights.hpp"

namespace sbc {

enum class Method { SC, SBC };

inline std::string_view to_string(Method m) { return m == Method::SC ? "SC" : "SBC"; }

struct EstimateOptions {
  /// Number of post-treatment periods to impute. 0 means the filter horizon h.
  /// Beyond h the SBC trend is extended recursively, feeding imputed
  /// counterfactuals back in as lags.
  int horizon = 0;
};

/**
 * Counterfactual path for the treated unit.
 *
 * `pre_fitted` covers the fit window [h+p, t0]; `post_counterfactual` and
 * `effects` cover t0+1..t0+horizon.
 */
struct CounterfactualReport {
  Method method = Method::SC;
  WeightRegime regime;
  WeightSolution weights;
  EstimationWindow window;
  int t0 = 0;
  Vector pre_fitted;
  Vector pre_actual;
  Vector post_counterfactual;
  Vector post_actual;
  Vector effects;
  double pre_mse = 0.0;
  // Treated-unit trend forecast over the horizon (SBC only).
  std::optional<Vector> trend_forecast;

  int horizon() const { return static_cast<int>(post_counterfactual.size()); }

  /// Mean squared error of the counterfactual against a known Y(0) path.
  double post_mse_vs(const Vector& truth) const {
    return (truth - post_counterfactual).squaredNorm() / static_cast<double>(truth.size());
  }
  double pre_sse() const { return (pre_actual - pre_fitted).squaredNorm(); }
  double post_sse_vs(const Vector& truth) const { return (truth - post_counterfactual).squaredNorm(); }
};

namespace detail {

inline int resolve_horizon(const PanelData& panel, const FilterSpec& spec, const EstimateOptions& opts) {
  const int horizon = opts.horizon > 0 ? opts.horizon : spec.h;
  if (panel.t0() + horizon > panel.periods()) {
    throw Error(ErrorCode::InvalidSpec, "horizon " + std::to_string(horizon) +
                                            " runs past the last observed period (T - t0 = " +
                                            std::to_string(panel.periods() - panel.t0()) + ")");
  }
  return horizon;
}

/// Donor outcomes over periods [first, last] as a (periods x donors) design.
inline Matrix donor_block(const PanelData& panel, int first, int last) {
  const auto donors = panel.donor_units();
  Matrix x(last - first + 1, static_cast<Eigen::Index>(donors.size()));
  for (std::size_t c = 0; c < donors.size(); ++c) {
    x.col(static_cast<Eigen::Index>(c)) =
        panel.outcomes().row(donors[c] - 1).segment(first - 1, last - first + 1).transpose();
  }
  return x;
}

inline void finish_report(CounterfactualReport& report, const PanelData& panel) {
  const Vector treated = panel.treated_series();
  const int horizon = static_cast<int>(report.post_counterfactual.size());
  report.post_actual = treated.segment(panel.t0(), horizon);
  report.effects = report.post_actual - report.post_counterfactual;
  report.pre_mse = report.pre_sse() / static_cast<double>(report.window.effective_size);
}

}  // namespace detail

/// Conventional synthetic control on raw outcomes over the shared window [h+p, t0].
inline CounterfactualReport sc_estimate(const PanelData& panel, const WeightRegime& regime,
                                        const EstimationWindow& window, int horizon) {
  regime.validate();
  if (horizon < 1 || panel.t0() + horizon > panel.periods()) {
    throw Error(ErrorCode::InvalidSpec, "SC horizon must lie in 1..T-t0");
  }
  const Vector treated = panel.treated_series();
  const Matrix x_pre = detail::donor_block(panel, window.first_fit_period, window.last_fit_period);
  const Vector y_pre = treated.segment(window.offset(), window.effective_size);

  CounterfactualReport report;
  report.method = Method::SC;
  report.regime = regime;
  report.window = window;
  report.t0 = panel.t0();
  report.weights = solve_weights(x_pre, y_pre, regime);
  report.pre_actual = y_pre;
  report.pre_fitted = report.weights.predict(x_pre);
  const Matrix x_post = detail::donor_block(panel, panel.t0() + 1, panel.t0() + horizon);
  report.post_counterfactual = report.weights.predict(x_post);
  detail::finish_report(report, panel);
  return report;
}

inline CounterfactualReport sc_estimate(const PanelData& panel, const FilterSpec& spec,
                                        const WeightRegime& regime, const EstimateOptions& opts = {}) {
  const auto window = validate_panel(panel, spec);
  return sc_estimate(panel, regime, window, detail::resolve_horizon(panel, spec, opts));
}

/**
 * Synthetic business cycle: filter every unit on pre-treatment data, forecast
 * the treated trend from its own lags, weight donor cycles (no intercept) to
 * match the treated cycle, and add the two pieces back together.
 */
inline CounterfactualReport sbc_estimate(const PanelData& panel, const FilterSpec& spec,
                                         const WeightRegime& regime, const EstimateOptions& opts = {}) {
  regime.validate();
  const auto window = validate_panel(panel, spec);
  const int horizon = detail::resolve_horizon(panel, spec, opts);
  const int treated_unit = panel.treated_unit();

  auto fits = decompose_panel(panel, spec);
  FilterFit treated_fit = fits[static_cast<std::size_t>(treated_unit - 1)];
  std::vector<FilterFit> donor_fits;
  for (auto& fit : fits) {
    if (fit.unit != treated_unit) donor_fits.push_back(std::move(fit));
  }

  Matrix donor_cycles(window.effective_size, static_cast<Eigen::Index>(donor_fits.size()));
  for (std::size_t c = 0; c < donor_fits.size(); ++c) {
    donor_cycles.col(static_cast<Eigen::Index>(c)) = donor_fits[c].cycle;
  }

  CounterfactualReport report;
  report.method = Method::SBC;
  report.regime = regime;
  report.window = window;
  report.t0 = panel.t0();
  report.weights = solve_weights(donor_cycles, treated_fit.cycle, regime.without_intercept());

  const Vector treated = panel.treated_series();
  report.pre_actual = treated.segment(window.offset(), window.effective_size);
  report.pre_fitted = treated_fit.trend + donor_cycles * report.weights.weights;

  const Matrix post_cycles =
      extrapolate_cycles(donor_fits, panel, spec, panel.t0() + 1, panel.t0() + horizon);
  const Vector synthetic_cycle = post_cycles.transpose() * report.weights.weights;

  Vector trend(horizon);
  const Vector within_h = forecast_trend(treated_fit, treated, panel.t0(), spec);
  const int direct = std::min(horizon, spec.h);
  trend.head(direct) = within_h.head(direct);
  if (horizon > spec.h) {
    // Recursive extension: lags dated after t0 come from the imputed path.
    Vector path = treated.head(panel.t0() + horizon);
    for (int k = 0; k < direct; ++k) path(panel.t0() + k) = trend(k) + synthetic_cycle(k);
    for (int k = direct; k < horizon; ++k) {
      const int period = panel.t0() + k + 1;
      trend(k) = project_trend(treated_fit.alpha, path, period, spec);
      path(period - 1) = trend(k) + synthetic_cycle(k);
    }
  }
  report.trend_forecast = trend;
  report.post_counterfactual = trend + synthetic_cycle;
  detail::finish_report(report, panel);
  return report;
}

struct PlaceboResult {
  CounterfactualReport sc;
  CounterfactualReport sbc;
};

/// Both estimators re-run with the treatment date moved back to `placebo_t0`.
inline PlaceboResult placebo_run(const PanelData& panel, int placebo_t0, const FilterSpec& spec,
                                 const WeightRegime& regime, const EstimateOptions& opts = {}) {
  if (placebo_t0 >= panel.t0()) {
    throw Error(ErrorCode::InvalidConfig, "placebo date " + std::to_string(placebo_t0) +
                                              " must precede t0=" + std::to_string(panel.t0()));
  }
  if (placebo_t0 <= 1) {
    throw Error(ErrorCode::WindowTooShort, "placebo date leaves no pre-treatment sample");
  }
  const PanelData shifted = panel.with_t0(placebo_t0);
  make_window(placebo_t0, spec);
  return {sc_estimate(shifted, spec, regime, opts), sbc_estimate(shifted, spec, regime, opts)};
}

struct WeightComparison {
  std::vector<std::string> donors;
  WeightSolution raw;
  WeightSolution trend;
  WeightSolution cycle;
};

/// Weights fitted on raw outcomes, trend components and cycle components over the same window.
inline WeightComparison weight_comparison(const PanelData& panel, const FilterSpec& spec,
                                          const WeightRegime& regime) {
  regime.validate();
  const auto window = validate_panel(panel, spec);
  const auto fits = decompose_panel(panel, spec);
  const int treated_unit = panel.treated_unit();
  const auto donors = panel.donor_units();

  Matrix trends(window.effective_size, static_cast<Eigen::Index>(donors.size()));
  Matrix cycles(window.effective_size, static_cast<Eigen::Index>(donors.size()));
  for (std::size_t c = 0; c < donors.size(); ++c) {
    const auto& fit = fits[static_cast<std::size_t>(donors[c] - 1)];
    trends.col(static_cast<Eigen::Index>(c)) = fit.trend;
    cycles.col(static_cast<Eigen::Index>(c)) = fit.cycle;
  }
  const auto& treated_fit = fits[static_cast<std::size_t>(treated_unit - 1)];
  const Matrix raw_x = detail::donor_block(panel, window.first_fit_period, window.last_fit_period);
  const Vector raw_y = panel.treated_series().segment(window.offset(), window.effective_size);

  WeightComparison out;
  out.donors = panel.donor_labels();
  out.raw = solve_weights(raw_x, raw_y, regime);
  out.trend = solve_weights(trends, treated_fit.trend, regime);
  out.cycle = solve_weights(cycles, treated_fit.cycle, regime.without_intercept());
  return out;
}

}  // namespace sbc
