#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sbc/estimators.hpp"
#include "sbc/linalg.hpp"
#include "sbc/rng.hpp"

namespace sbc::sim {

enum class Model { Model1, Model2, Model3 };
enum class DriftKind { Zero, Fixed, Gaussian };
/// How the N(0, T0^(-1/3)) loading scale for Model 3 is read.
enum class LoadingScale { Variance, StdDev };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::Model1: return "model1";
    case Model::Model2: return "model2";
    case Model::Model3: return "model3";
  }
  return "unknown";
}

inline Model parse_model(std::string_view s) {
  if (s == "model1" || s == "1") return Model::Model1;
  if (s == "model2" || s == "2") return Model::Model2;
  if (s == "model3" || s == "3") return Model::Model3;
  throw Error(ErrorCode::InvalidConfig, "unknown model '" + std::string(s) + "'");
}

inline std::string_view to_string(DriftKind d) {
  switch (d) {
    case DriftKind::Zero: return "zero";
    case DriftKind::Fixed: return "fixed";
    case DriftKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

inline DriftKind parse_drift(std::string_view s) {
  if (s == "zero") return DriftKind::Zero;
  if (s == "fixed") return DriftKind::Fixed;
  if (s == "gaussian") return DriftKind::Gaussian;
  throw Error(ErrorCode::InvalidConfig, "unknown drift '" + std::string(s) + "'");
}

inline std::string_view to_string(LoadingScale s) {
  return s == LoadingScale::Variance ? "variance" : "sd";
}

inline LoadingScale parse_loading_scale(std::string_view s) {
  if (s == "variance") return LoadingScale::Variance;
  if (s == "sd" || s == "stddev") return LoadingScale::StdDev;
  throw Error(ErrorCode::InvalidConfig, "unknown loading scale '" + std::string(s) + "'");
}

/// Test hooks that switch off parts of a DGP. All off in normal runs.
struct Hooks {
  bool zero_noise = false;
  bool zero_ar_loadings = false;
  bool zero_rw_loadings = false;
  /// Unit 2 reuses the treated unit's loadings.
  bool clone_treated_loadings = false;
  /// Overwrite the last donor with the treated unit's path.
  bool duplicate_treated_as_donor = false;
};

struct SimulationSpec {
  Model model = Model::Model1;
  int n_units = 12;
  int t0 = 100;
  int h = 2;
  int p = 2;
  DriftKind drift = DriftKind::Zero;
  double drift_value = 0.5;  // fixed drift, or sd of the Gaussian drift
  double phi = 0.5;
  LoadingScale loading_scale = LoadingScale::Variance;
  WeightRegime regime;
  int replications = 2000;
  std::uint64_t master_seed = 20240501;
  Hooks hooks;

  FilterSpec filter() const { return {h, p}; }
  int periods() const { return t0 + h; }

  /// Table label for the DGP parameter column.
  std::string parameter_label() const {
    char buf[64];
    if (model == Model::Model1) {
      switch (drift) {
        case DriftKind::Zero: return "mu=0";
        case DriftKind::Fixed: std::snprintf(buf, sizeof buf, "mu=%g", drift_value); return buf;
        case DriftKind::Gaussian:
          std::snprintf(buf, sizeof buf, "mu~N(0,%g)", drift_value * drift_value);
          return buf;
      }
    }
    std::snprintf(buf, sizeof buf, "phi=%g", phi);
    return buf;
  }

  void validate() const {
    if (n_units < 3) throw Error(ErrorCode::InvalidSpec, "simulation needs n_units >= 3");
    if (replications < 1) throw Error(ErrorCode::InvalidSpec, "replications must be >= 1");
    if (!(phi > -1.0 && phi < 1.0)) throw Error(ErrorCode::InvalidSpec, "phi must lie in (-1, 1)");
    if (drift_value < 0.0 && drift == DriftKind::Gaussian) {
      throw Error(ErrorCode::InvalidSpec, "drift sd must be non-negative");
    }
    regime.validate();
    make_window(t0, filter());
  }
};

/// A simulated panel and the treated unit's untreated outcomes after t0.
struct SimulatedPanel {
  PanelData panel;
  Vector truth_post;
};

namespace detail {

/// Two AR(1) factors started from their stationary distribution; rows are factors.
inline Matrix ar_factors(rng::NormalStream& draw, int periods, double phi) {
  Matrix f(2, periods);
  const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);
  for (int j = 0; j < 2; ++j) {
    double prev = draw(stationary_sd);
    for (int t = 0; t < periods; ++t) {
      prev = phi * prev + draw();
      f(j, t) = prev;
    }
  }
  return f;
}

inline Matrix rw_factors(rng::NormalStream& draw, int periods) {
  Matrix f(2, periods);
  for (int j = 0; j < 2; ++j) {
    double level = 0.0;
    for (int t = 0; t < periods; ++t) {
      level += draw();
      f(j, t) = level;
    }
  }
  return f;
}

inline Matrix noise(rng::NormalStream& draw, int units, int periods, bool zero) {
  Matrix e(units, periods);
  for (int i = 0; i < units; ++i) {
    for (int t = 0; t < periods; ++t) e(i, t) = draw();
  }
  if (zero) e.setZero();
  return e;
}

inline Matrix loadings(rng::NormalStream& draw, int units, double sd, bool zero, bool clone) {
  Matrix l(units, 2);
  for (int i = 0; i < units; ++i) {
    for (int j = 0; j < 2; ++j) l(i, j) = draw(sd);
  }
  if (clone) l.row(1) = l.row(0);
  if (zero) l.setZero();
  return l;
}

/// Cumulate per-period increments into levels starting from Y_0 = 0.
inline Matrix cumulate(const Matrix& increments) {
  Matrix y = increments;
  for (Eigen::Index t = 1; t < y.cols(); ++t) y.col(t) += y.col(t - 1);
  return y;
}

inline SimulatedPanel finish(const SimulationSpec& spec, Matrix y) {
  if (spec.hooks.duplicate_treated_as_donor) y.row(y.rows() - 1) = y.row(0);
  Vector truth = y.row(0).segment(spec.t0, spec.h).transpose();
  return {PanelData(std::move(y), 1, spec.t0), std::move(truth)};
}

}  // namespace detail

/// Independent random walks with drift: Y_t = Y_{t-1} + mu_i + e_t, Y_0 = 0.
inline SimulatedPanel gen_model1(const SimulationSpec& spec, std::uint64_t seed) {
  rng::NormalStream draw(seed);
  const int n = spec.n_units;
  const int periods = spec.periods();
  Vector mu(n);
  for (int i = 0; i < n; ++i) {
    switch (spec.drift) {
      case DriftKind::Zero: mu(i) = 0.0; break;
      case DriftKind::Fixed: mu(i) = spec.drift_value; break;
      case DriftKind::Gaussian: mu(i) = draw(spec.drift_value); break;
    }
  }
  Matrix inc = detail::noise(draw, n, periods, spec.hooks.zero_noise);
  inc.colwise() += mu;
  return detail::finish(spec, detail::cumulate(inc));
}

/// Unit-root trends driven by two common stationary AR(1) factors plus noise.
inline SimulatedPanel gen_model2(const SimulationSpec& spec, std::uint64_t seed) {
  rng::NormalStream draw(seed);
  const int n = spec.n_units;
  const int periods = spec.periods();
  const Matrix lam = detail::loadings(draw, n, 1.0, spec.hooks.zero_ar_loadings, spec.hooks.clone_treated_loadings);
  const Matrix f = detail::ar_factors(draw, periods, spec.phi);
  const Matrix eps = detail::noise(draw, n, periods, spec.hooks.zero_noise);
  return detail::finish(spec, detail::cumulate(lam * f + eps));
}

/// Standard deviation of the Model 3 random-walk loadings, N(0, T0^(-1/3)).
inline double rw_loading_sd(const SimulationSpec& spec) {
  const double scale = std::pow(static_cast<double>(spec.t0), -1.0 / 3.0);
  return spec.loading_scale == LoadingScale::Variance ? std::sqrt(scale) : scale;
}

/**
 * Partial cointegration. Units 1..floor(N+1)/2 load on two common random-walk
 * factors and the AR factors in levels; the rest follow Model 2 with the same
 * AR factors.
 */
inline SimulatedPanel gen_model3(const SimulationSpec& spec, std::uint64_t seed) {
  rng::NormalStream draw(seed);
  const int n = spec.n_units;
  const int half = n / 2;
  const int periods = spec.periods();
  const double rw_sd = rw_loading_sd(spec);

  const Matrix lam_rw = detail::loadings(draw, half, rw_sd, spec.hooks.zero_rw_loadings,
                                         spec.hooks.clone_treated_loadings && half >= 2);
  const Matrix lam_ar = detail::loadings(draw, n, 1.0, spec.hooks.zero_ar_loadings, spec.hooks.clone_treated_loadings);
  const Matrix f_rw = detail::rw_factors(draw, periods);
  const Matrix f_ar = detail::ar_factors(draw, periods, spec.phi);
  const Matrix eps = detail::noise(draw, n, periods, spec.hooks.zero_noise);

  Matrix y(n, periods);
  y.topRows(half) = lam_rw * f_rw + lam_ar.topRows(half) * f_ar + eps.topRows(half);
  y.bottomRows(n - half) = detail::cumulate(lam_ar.bottomRows(n - half) * f_ar + eps.bottomRows(n - half));
  return detail::finish(spec, std::move(y));
}

inline SimulatedPanel generate(const SimulationSpec& spec, std::uint64_t seed) {
  switch (spec.model) {
    case Model::Model1: return gen_model1(spec, seed);
    case Model::Model2: return gen_model2(spec, seed);
    case Model::Model3: return gen_model3(spec, seed);
  }
  throw Error(ErrorCode::InvalidSpec, "unknown model");
}

struct ReplicationResult {
  double pre_sbc_sse = 0.0;
  double pre_sc_sse = 0.0;
  double post_sbc_sse = 0.0;
  double post_sc_sse = 0.0;
  /// Mean signed SBC post error, Y(0) - Yhat(0), over the horizon.
  double sbc_post_bias = 0.0;

  friend bool operator==(const ReplicationResult&, const ReplicationResult&) = default;
};

inline ReplicationResult run_replication(const SimulationSpec& spec, std::uint64_t index) {
  const auto sim = generate(spec, rng::stream_seed(spec.master_seed, index));
  const auto filter = spec.filter();
  const auto sbc = sbc_estimate(sim.panel, filter, spec.regime);
  const auto sc = sc_estimate(sim.panel, filter, spec.regime);
  ReplicationResult r;
  r.pre_sbc_sse = sbc.pre_sse();
  r.pre_sc_sse = sc.pre_sse();
  r.post_sbc_sse = sbc.post_sse_vs(sim.truth_post);
  r.post_sc_sse = sc.post_sse_vs(sim.truth_post);
  r.sbc_post_bias = (sim.truth_post - sbc.post_counterfactual).mean();
  return r;
}

struct MseRatioReport {
  SimulationSpec spec;
  double pre_ratio = 0.0;
  double post_ratio = 0.0;
  double median_pre_ratio = 0.0;
  double median_post_ratio = 0.0;
  double sbc_bias_mean = 0.0;
  double sbc_bias_se = 0.0;
  int completed = 0;
  int failures = 0;
  std::vector<ReplicationResult> per_replication;
};

/// Worker count from SBC_THREADS, falling back to the hardware count.
inline int default_threads() {
  if (const char* env = std::getenv("SBC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

/**
 * Run all replications and aggregate.
 *
 * Headline ratios are ratios of summed squared errors across replications.
 * Results are written by replication index and summed pairwise in index
 * order, so the report does not depend on the worker count.
 */
inline MseRatioReport run_monte_carlo(const SimulationSpec& spec, int threads = 0,
                                      bool keep_per_replication = false) {
  spec.validate();
  const int reps = spec.replications;
  const int workers = std::clamp(threads > 0 ? threads : default_threads(), 1, reps);

  std::vector<std::optional<ReplicationResult>> results(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto work = [&] {
    for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1)) {
      try {
        results[static_cast<std::size_t>(i)] = run_replication(spec, static_cast<std::uint64_t>(i));
      } catch (const Error&) {
        // Excluded and counted below.
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (fatal) std::rethrow_exception(fatal);

  MseRatioReport report;
  report.spec = spec;
  std::vector<double> pre_sbc, pre_sc, post_sbc, post_sc, bias, pre_ratio, post_ratio;
  for (const auto& r : results) {
    if (!r) {
      ++report.failures;
      continue;
    }
    pre_sbc.push_back(r->pre_sbc_sse);
    pre_sc.push_back(r->pre_sc_sse);
    post_sbc.push_back(r->post_sbc_sse);
    post_sc.push_back(r->post_sc_sse);
    bias.push_back(r->sbc_post_bias);
    if (r->pre_sc_sse > 0.0) pre_ratio.push_back(r->pre_sbc_sse / r->pre_sc_sse);
    if (r->post_sc_sse > 0.0) post_ratio.push_back(r->post_sbc_sse / r->post_sc_sse);
    if (keep_per_replication) report.per_replication.push_back(*r);
  }
  report.completed = static_cast<int>(pre_sbc.size());
  if (report.failures * 100 > reps) {
    throw Error(ErrorCode::FailureRateExceeded,
                std::to_string(report.failures) + " of " + std::to_string(reps) + " replications failed");
  }

  report.pre_ratio = linalg::pairwise_sum(pre_sbc) / linalg::pairwise_sum(pre_sc);
  report.post_ratio = linalg::pairwise_sum(post_sbc) / linalg::pairwise_sum(post_sc);
  report.median_pre_ratio = linalg::median(pre_ratio);
  report.median_post_ratio = linalg::median(post_ratio);

  const double count = static_cast<double>(bias.size());
  report.sbc_bias_mean = linalg::pairwise_sum(bias) / count;
  std::vector<double> centred(bias.size());
  for (std::size_t k = 0; k < bias.size(); ++k) {
    const double d = bias[k] - report.sbc_bias_mean;
    centred[k] = d * d;
  }
  report.sbc_bias_se =
      count > 1.0 ? std::sqrt(linalg::pairwise_sum(centred) / (count - 1.0) / count) : 0.0;
  return report;
}

}  // namespace sbc::sim
