#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sbc/error.hpp"

namespace sbc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Hamilton filter parameters: forecast horizon `h` and number of own lags `p`.
struct FilterSpec {
  int h = 2;
  int p = 2;

  void validate() const {
    if (h < 1 || p < 1) {
      throw Error(ErrorCode::InvalidSpec, "filter requires h >= 1 and p >= 1, got h=" +
                                              std::to_string(h) + " p=" + std::to_string(p));
    }
  }
};

/// Pre-treatment fit window [h+p, t0] in 1-based periods.
struct EstimationWindow {
  int first_fit_period = 0;
  int last_fit_period = 0;
  int effective_size = 0;

  /// 0-based column offset of the first fit period.
  int offset() const { return first_fit_period - 1; }

  friend bool operator==(const EstimationWindow&, const EstimationWindow&) = default;
};

/**
 * Balanced outcome panel of N+1 units over T periods.
 *
 * Periods are 1-based in the public surface: `t0` is the last pre-treatment
 * period and doubles as the number of pre-treatment observations. Storage is
 * a units x periods matrix, so period t lives in column t-1.
 */
class PanelData {
 public:
  PanelData(Matrix outcomes, int treated_unit, int t0, std::vector<std::string> unit_labels = {},
            std::vector<int> period_labels = {})
      : outcomes_(std::move(outcomes)),
        treated_unit_(treated_unit),
        t0_(t0),
        unit_labels_(std::move(unit_labels)),
        period_labels_(std::move(period_labels)) {
    const auto units = static_cast<int>(outcomes_.rows());
    const auto periods = static_cast<int>(outcomes_.cols());
    if (units < 2) {
      throw Error(ErrorCode::InvalidPanel, "panel needs a treated unit and at least one donor");
    }
    if (t0_ <= 1 || t0_ > periods) {
      throw Error(ErrorCode::InvalidPanel, "t0 must satisfy 1 < t0 <= T, got t0=" +
                                               std::to_string(t0_) + " T=" + std::to_string(periods));
    }
    if (!outcomes_.allFinite()) {
      throw Error(ErrorCode::InvalidPanel, "panel contains missing or non-finite outcomes");
    }
    if (unit_labels_.empty()) {
      for (int i = 1; i <= units; ++i) unit_labels_.push_back("unit" + std::to_string(i));
    }
    if (period_labels_.empty()) {
      for (int t = 1; t <= periods; ++t) period_labels_.push_back(t);
    }
    if (static_cast<int>(unit_labels_.size()) != units ||
        static_cast<int>(period_labels_.size()) != periods) {
      throw Error(ErrorCode::InvalidPanel, "label counts do not match the outcome matrix");
    }
    for (std::size_t t = 1; t < period_labels_.size(); ++t) {
      if (period_labels_[t] != period_labels_[t - 1] + 1) {
        throw Error(ErrorCode::InvalidPanel, "period labels must increase with unit step");
      }
    }
  }

  const Matrix& outcomes() const { return outcomes_; }
  int units() const { return static_cast<int>(outcomes_.rows()); }
  int donors() const { return units() - 1; }
  int periods() const { return static_cast<int>(outcomes_.cols()); }
  int treated_unit() const { return treated_unit_; }
  int t0() const { return t0_; }
  const std::vector<std::string>& unit_labels() const { return unit_labels_; }
  const std::vector<int>& period_labels() const { return period_labels_; }

  /// Full series of a unit (1-based unit index).
  Vector series(int unit) const { return outcomes_.row(unit - 1).transpose(); }
  Vector treated_series() const { return series(treated_unit_); }

  /// 1-based unit indices of the donors, in canonical order.
  std::vector<int> donor_units() const {
    std::vector<int> out;
    for (int i = 1; i <= units(); ++i) {
      if (i != treated_unit_) out.push_back(i);
    }
    return out;
  }

  std::vector<std::string> donor_labels() const {
    std::vector<std::string> out;
    for (int i : donor_units()) out.push_back(unit_labels_[i - 1]);
    return out;
  }

  /// Same data with the treatment date moved (placebo runs).
  PanelData with_t0(int new_t0) const {
    return PanelData(outcomes_, treated_unit_, new_t0, unit_labels_, period_labels_);
  }

 private:
  Matrix outcomes_;
  int treated_unit_;
  int t0_;
  std::vector<std::string> unit_labels_;
  std::vector<int> period_labels_;
};

/// Fit window implied by (h, p, t0). Every downstream fit uses exactly this window.
inline EstimationWindow make_window(int t0, const FilterSpec& filter) {
  filter.validate();
  EstimationWindow window;
  window.first_fit_period = filter.h + filter.p;
  window.last_fit_period = t0;
  window.effective_size = window.last_fit_period - window.first_fit_period + 1;
  if (window.effective_size < filter.p + 2) {
    throw Error(ErrorCode::WindowTooShort,
                "effective pre-treatment sample " + std::to_string(window.effective_size) +
                    " is below the minimum p+2=" + std::to_string(filter.p + 2) +
                    " (t0=" + std::to_string(t0) + ", h=" + std::to_string(filter.h) +
                    ", p=" + std::to_string(filter.p) + ")");
  }
  return window;
}

inline EstimationWindow validate_panel(const PanelData& panel, const FilterSpec& filter) {
  if (panel.treated_unit() < 1 || panel.treated_unit() > panel.units()) {
    throw Error(ErrorCode::BadTreatedIndex,
                "treated unit " + std::to_string(panel.treated_unit()) + " outside 1.." +
                    std::to_string(panel.units()));
  }
  return make_window(panel.t0(), filter);
}

}  // namespace sbc
