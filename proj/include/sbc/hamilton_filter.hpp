#pragma once

#include <string>
#include <vector>

#include "sbc/linalg.hpp"
#include "sbc/panel.hpp"

namespace sbc {

/**
 * Trend/cycle split of one unit over the fit window.
 *
 * `alpha` holds the intercept first, then the coefficients on the lags
 * y[t-h], ..., y[t-h-p+1]. `trend` and `cycle` are indexed from the first
 * fit period: element k belongs to period window.first_fit_period + k.
 */
struct FilterFit {
  int unit = 1;
  Vector alpha;
  Vector trend;
  Vector cycle;
  EstimationWindow window;
  // Set when the lag design fell below the rank cutoff and a minimum-norm
  // solution was used.
  bool rank_deficient = false;
};

namespace detail {

inline void check_lag_range(int period, const FilterSpec& spec, int available) {
  const int oldest = period - spec.h - spec.p + 1;
  const int newest = period - spec.h;
  if (oldest < 1 || newest > available) {
    throw Error(ErrorCode::LagOutOfRange,
                "period " + std::to_string(period) + " needs lags " + std::to_string(oldest) + ".." +
                    std::to_string(newest) + " but only 1.." + std::to_string(available) +
                    " are available");
  }
}

}  // namespace detail

/// alpha_0 + sum_j alpha_j * series[t-h-j+1], with `period` 1-based.
inline double project_trend(const Vector& alpha, const Vector& series, int period,
                            const FilterSpec& spec) {
  double value = alpha(0);
  for (int j = 1; j <= spec.p; ++j) {
    value += alpha(j) * series(period - spec.h - j);
  }
  return value;
}

/// Regress series[t] on (1, series[t-h], ..., series[t-h-p+1]) over the fit window.
inline FilterFit fit_filter(const Vector& series, const EstimationWindow& window,
                            const FilterSpec& spec, int unit = 1) {
  spec.validate();
  if (window.first_fit_period != spec.h + spec.p ||
      window.effective_size != window.last_fit_period - window.first_fit_period + 1) {
    throw Error(ErrorCode::InvalidSpec, "estimation window does not match the filter spec");
  }
  if (series.size() < window.last_fit_period) {
    throw Error(ErrorCode::DimensionMismatch, "series shorter than the fit window");
  }

  const int rows = window.effective_size;
  Matrix design(rows, spec.p + 1);
  Vector response(rows);
  for (int k = 0; k < rows; ++k) {
    const int period = window.first_fit_period + k;
    response(k) = series(period - 1);
    design(k, 0) = 1.0;
    for (int j = 1; j <= spec.p; ++j) design(k, j) = series(period - spec.h - j);
  }

  const auto ls = linalg::lstsq(design, response);
  FilterFit fit;
  fit.unit = unit;
  fit.alpha = ls.coef;
  fit.trend = design * fit.alpha;
  fit.cycle = response - fit.trend;
  fit.window = window;
  fit.rank_deficient = ls.rank_deficient;
  return fit;
}

/// One fit per unit, each estimated on pre-treatment data only.
inline std::vector<FilterFit> decompose_panel(const PanelData& panel, const FilterSpec& spec) {
  const auto window = validate_panel(panel, spec);
  std::vector<FilterFit> fits;
  fits.reserve(static_cast<std::size_t>(panel.units()));
  for (int unit = 1; unit <= panel.units(); ++unit) {
    const Vector pre = panel.series(unit).head(panel.t0());
    fits.push_back(fit_filter(pre, window, spec, unit));
  }
  return fits;
}

/// Out-of-sample trend for periods t0+1..t0+h; every lag used is dated <= t0.
inline Vector forecast_trend(const FilterFit& fit, const Vector& series, int t0,
                             const FilterSpec& spec) {
  if (series.size() < t0) {
    throw Error(ErrorCode::DimensionMismatch, "series not observed through t0");
  }
  Vector out(spec.h);
  for (int k = 1; k <= spec.h; ++k) {
    const int period = t0 + k;
    detail::check_lag_range(period, spec, t0);
    out(k - 1) = project_trend(fit.alpha, series, period, spec);
  }
  return out;
}

/**
 * Post-treatment donor cycles y[t] - trend[t] for t = first..last, using the
 * pre-treatment coefficients and observed donor outcomes. Rows follow the
 * order of `fits`.
 */
inline Matrix extrapolate_cycles(const std::vector<FilterFit>& fits, const PanelData& panel,
                                 const FilterSpec& spec, int first_period, int last_period) {
  const int steps = last_period - first_period + 1;
  if (steps < 0 || last_period > panel.periods()) {
    throw Error(ErrorCode::LagOutOfRange, "cycle horizon " + std::to_string(first_period) + ".." +
                                              std::to_string(last_period) +
                                              " outside the observed panel");
  }
  Matrix cycles(static_cast<Eigen::Index>(fits.size()), steps);
  for (std::size_t r = 0; r < fits.size(); ++r) {
    const Vector series = panel.series(fits[r].unit);
    for (int k = 0; k < steps; ++k) {
      const int period = first_period + k;
      detail::check_lag_range(period, spec, panel.periods());
      cycles(static_cast<Eigen::Index>(r), k) =
          series(period - 1) - project_trend(fits[r].alpha, series, period, spec);
    }
  }
  return cycles;
}

}  // namespace sbc
