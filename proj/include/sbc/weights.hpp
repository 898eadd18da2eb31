#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbc/linalg.hpp"
#include "sbc/panel.hpp"

namespace sbc {

enum class WeightVariant { Unrestricted, SignedSumOne, NonNegativeSumOne };

inline std::string_view to_string(WeightVariant v) {
  switch (v) {
    case WeightVariant::Unrestricted: return "unrestricted";
    case WeightVariant::SignedSumOne: return "signed";
    case WeightVariant::NonNegativeSumOne: return "nonneg";
  }
  return "unknown";
}

inline WeightVariant parse_weight_variant(std::string_view name) {
  if (name == "unrestricted") return WeightVariant::Unrestricted;
  if (name == "signed" || name == "sum_one" || name == "signed_sum_one") {
    return WeightVariant::SignedSumOne;
  }
  if (name == "nonneg" || name == "simplex" || name == "non_negative") {
    return WeightVariant::NonNegativeSumOne;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown weight regime '" + std::string(name) + "'");
}

struct WeightRegime {
  WeightVariant variant = WeightVariant::Unrestricted;
  bool include_intercept = true;

  static WeightRegime unrestricted(bool intercept = true) {
    return {WeightVariant::Unrestricted, intercept};
  }
  static WeightRegime signed_sum_one() { return {WeightVariant::SignedSumOne, false}; }
  static WeightRegime simplex() { return {WeightVariant::NonNegativeSumOne, false}; }

  /// Regime used for the cycle fit: same constraints, never an intercept.
  WeightRegime without_intercept() const { return {variant, false}; }

  void validate() const {
    if (include_intercept && variant != WeightVariant::Unrestricted) {
      throw Error(ErrorCode::InvalidSpec, "only the unrestricted regime may carry an intercept");
    }
  }

  friend bool operator==(const WeightRegime&, const WeightRegime&) = default;
};

struct WeightSolution {
  Vector weights;
  std::optional<double> intercept;
  double objective = 0.0;  // residual sum of squares over the fit window
  WeightRegime regime;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool hit_max_iterations = false;
  // Smallest singular value of the active donor columns fell below 1e-10;
  // the optimum is then not unique and the returned iterate is one of many.
  bool collinear = false;

  /// Fitted values intercept + X w for a design with donors as columns.
  Vector predict(const Matrix& x) const {
    Vector out = x * weights;
    if (intercept) out.array() += *intercept;
    return out;
  }
};

struct SimplexOptions {
  int max_iterations = 100000;
  double relative_decrease_tol = 1e-12;
  double kkt_tol = 1e-8;
  /// Finish with the exact active-set pass on the identified support.
  bool active_set = true;
};

namespace detail {

inline void check_dims(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "design has " + std::to_string(x.rows()) + " rows but response has " +
                    std::to_string(y.size()));
  }
  if (x.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "design has no donor columns");
}

/// Normalisation for gradient-based residuals: largest entry of the Gram system.
inline double gram_scale(const Matrix& gram, const Vector& xty) {
  double s = 1.0;
  if (gram.size() > 0) s = std::max(s, gram.cwiseAbs().maxCoeff());
  if (xty.size() > 0) s = std::max(s, xty.cwiseAbs().maxCoeff());
  return s;
}

inline double sse(const Matrix& x, const Vector& y, const Vector& w, double intercept = 0.0) {
  Vector r = y - x * w;
  r.array() -= intercept;
  return r.squaredNorm();
}

/// Simplex optimality violation of gradient `g` at `w` (unscaled).
inline double simplex_kkt(const Vector& w, const Vector& g) {
  double common = 0.0;
  int active = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) {
      common += g(i);
      ++active;
    }
  }
  if (active == 0) return std::numeric_limits<double>::infinity();
  common /= active;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) {
      worst = std::max(worst, std::abs(g(i) - common));
    } else {
      worst = std::max(worst, common - g(i));
    }
  }
  return worst;
}

inline bool columns_collinear(const Matrix& x, const std::vector<Eigen::Index>& cols) {
  if (cols.empty()) return false;
  Matrix sub(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
  if (sub.rows() < sub.cols()) return true;
  Eigen::BDCSVD<Matrix> svd(sub);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) < 1e-10 * std::max(1.0, s(0));
}

}  // namespace detail

/// Euclidean projection onto the probability simplex (sort-based).
inline Vector project_to_simplex(const Vector& v) {
  const auto n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Minimum-norm least squares, optionally with an intercept (vertical regression).
inline WeightSolution solve_unrestricted(const Matrix& x, const Vector& y, bool intercept) {
  detail::check_dims(x, y);
  const auto n = x.cols();
  Matrix design = x;
  if (intercept) {
    design.resize(x.rows(), n + 1);
    design.col(0).setOnes();
    design.rightCols(n) = x;
  }
  const auto ls = linalg::lstsq(design, y);

  WeightSolution sol;
  sol.regime = WeightRegime::unrestricted(intercept);
  if (intercept) {
    sol.intercept = ls.coef(0);
    sol.weights = ls.coef.tail(n);
  } else {
    sol.weights = ls.coef;
  }
  const Vector residual = y - design * ls.coef;
  sol.objective = residual.squaredNorm();
  const Matrix gram = design.transpose() * design;
  const Vector dty = design.transpose() * y;
  sol.kkt_residual = (design.transpose() * residual).cwiseAbs().maxCoeff() / detail::gram_scale(gram, dty);
  sol.iterations = 1;
  sol.collinear = ls.rank_deficient;
  return sol;
}

/**
 * Least squares subject to sum(w) = 1, via the Lagrangian closed form
 * w = w_u + (1 - 1'w_u) / (1'G+1) * G+1 with G = X'X.
 *
 * When the ones vector has a component outside range(G) the constraint can
 * be met along the null space of X without changing the fit, and that
 * direction is used instead.
 */
inline WeightSolution solve_sum_one(const Matrix& x, const Vector& y) {
  detail::check_dims(x, y);
  const auto n = x.cols();
  const Vector ones = Vector::Ones(n);
  const auto ls = linalg::lstsq(x, y);
  const Vector& wu = ls.coef;
  const Matrix gpinv = linalg::gram_pinv(x);
  const Matrix gram = x.transpose() * x;

  // Component of 1 in null(G), i.e. (I - G+G) 1.
  const Vector in_range = gpinv * (gram * ones);
  const Vector null_part = ones - in_range;
  const double gap = 1.0 - wu.sum();

  Vector w;
  if (null_part.cwiseAbs().maxCoeff() > 1e-8) {
    w = wu + (gap / null_part.sum()) * null_part;
  } else {
    const Vector direction = gpinv * ones;
    const double denom = direction.sum();
    if (std::abs(denom) <= 1e-14) {
      throw Error(ErrorCode::DegenerateConstraint, "1'G+1 vanishes; sum-to-one constraint is degenerate");
    }
    w = wu + (gap / denom) * direction;
  }

  WeightSolution sol;
  sol.regime = WeightRegime::signed_sum_one();
  sol.weights = w;
  sol.objective = detail::sse(x, y, w);
  const Vector xty = x.transpose() * y;
  const Vector g = gram * w - xty;
  sol.kkt_residual = (g.array() - g.mean()).abs().maxCoeff() / detail::gram_scale(gram, xty);
  sol.iterations = 1;
  sol.collinear = ls.rank_deficient;
  return sol;
}

namespace detail {

/// Primal active-set refinement on the simplex, starting from a feasible `w`.
/// Returns the number of steps taken; `w` is updated in place.
inline int simplex_active_set(const Matrix& x, const Vector& y, const Matrix& gram,
                              const Vector& xty, double scale, double kkt_tol, Vector& w) {
  const auto n = x.cols();
  std::vector<bool> in_set(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) in_set[static_cast<std::size_t>(i)] = w(i) > 0.0;

  const int max_steps = 5 * static_cast<int>(n) + 20;
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) cols.push_back(i);
    }
    if (cols.empty()) return steps;
    Matrix sub(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
    const Vector v_sub = solve_sum_one(sub, y).weights;
    Vector v = Vector::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) v(cols[k]) = v_sub(static_cast<Eigen::Index>(k));

    if (v_sub.minCoeff() >= 0.0) {
      w = v;
      const Vector g = gram * w - xty;
      double common = 0.0;
      for (auto c : cols) common += g(c);
      common /= static_cast<double>(cols.size());
      Eigen::Index entering = -1;
      double most_negative = -kkt_tol * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in_set[static_cast<std::size_t>(i)]) continue;
        const double slack = g(i) - common;
        if (slack < most_negative) {
          most_negative = slack;
          entering = i;
        }
      }
      if (entering < 0) return steps + 1;
      in_set[static_cast<std::size_t>(entering)] = true;
      continue;
    }

    // Move toward v until the first coordinate hits zero, then drop it.
    double step = 1.0;
    Eigen::Index blocking = -1;
    for (auto c : cols) {
      if (v(c) < 0.0) {
        const double ratio = w(c) / (w(c) - v(c));
        if (ratio < step) {
          step = ratio;
          blocking = c;
        }
      }
    }
    w += step * (v - w);
    if (blocking >= 0) {
      w(blocking) = 0.0;
      in_set[static_cast<std::size_t>(blocking)] = false;
    }
    for (auto c : cols) {
      if (w(c) <= 0.0) {
        w(c) = 0.0;
        in_set[static_cast<std::size_t>(c)] = false;
      }
    }
    w = w.cwiseMax(0.0);
    const double total = w.sum();
    if (total > 0.0) w /= total;
  }
  return steps;
}

}  // namespace detail

/**
 * Least squares over the probability simplex.
 *
 * Projected gradient with Barzilai-Borwein steps and an exact line search
 * along the projected direction does the bulk of the work. A primal
 * active-set pass on the support found by the gradient phase then solves the
 * equality-constrained subproblem exactly, which is what brings the KKT
 * residual down to rounding level.
 *
 * The KKT residual is reported relative to the largest entry of (X'X, X'y).
 */
inline WeightSolution solve_simplex(const Matrix& x, const Vector& y, const SimplexOptions& opts = {}) {
  detail::check_dims(x, y);
  const auto n = x.cols();
  const Matrix gram = x.transpose() * x;
  const Vector xty = x.transpose() * y;
  const double scale = detail::gram_scale(gram, xty);

  auto quad = [&](const Vector& w) { return 0.5 * w.dot(gram * w) - xty.dot(w); };

  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector g = gram * w - xty;
  double f = quad(w);
  double step = 1.0 / std::max(gram.diagonal().maxCoeff(), 1e-300);
  constexpr int kPolishEvery = 50;
  int iterations = 0;
  bool capped = true;

  for (; iterations < opts.max_iterations; ++iterations) {
    const Vector d = project_to_simplex(w - step * g) - w;
    if (d.cwiseAbs().maxCoeff() <= 1e-15) {
      capped = false;
      break;
    }
    const Vector gd = gram * d;
    const double slope = g.dot(d);
    const double curvature = d.dot(gd);
    double lambda = 1.0;
    if (curvature > 0.0) lambda = std::clamp(-slope / curvature, 0.0, 1.0);
    if (lambda <= 0.0) {
      capped = false;
      break;
    }

    const Vector s = lambda * d;
    w += s;
    // Project again so accumulated rounding never leaves the simplex.
    w = w.cwiseMax(0.0);
    w /= w.sum();
    const Vector g_new = gram * w - xty;
    const double f_new = quad(w);
    const Vector yv = g_new - g;
    const double sy = s.dot(yv);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-30, 1e30) : 1e30;

    const double decrease = f - f_new;
    g = g_new;
    f = f_new;
    if (decrease >= 0.0 && decrease <= opts.relative_decrease_tol * std::max(std::abs(f), 1e-300)) {
      ++iterations;
      capped = false;
      break;
    }
    // Once the support has settled the active-set pass finishes exactly.
    if (opts.active_set && (iterations + 1) % kPolishEvery == 0) {
      Vector trial = w;
      try {
        detail::simplex_active_set(x, y, gram, xty, scale, opts.kkt_tol, trial);
      } catch (const Error&) {
        continue;
      }
      if (trial.minCoeff() >= 0.0 &&
          detail::simplex_kkt(trial, gram * trial - xty) / scale <= opts.kkt_tol) {
        ++iterations;
        capped = false;
        break;
      }
    }
  }

  WeightSolution sol;
  sol.regime = WeightRegime::simplex();
  sol.hit_max_iterations = capped;

  Vector polished = w;
  int polish_steps = 0;
  if (opts.active_set) {
    try {
      polish_steps = detail::simplex_active_set(x, y, gram, xty, scale, opts.kkt_tol, polished);
    } catch (const Error&) {
      polished = w;
    }
  }
  const double pg_sse = detail::sse(x, y, w);
  const double polished_sse = detail::sse(x, y, polished);
  const double kkt_pg = detail::simplex_kkt(w, gram * w - xty) / scale;
  const double kkt_polished = detail::simplex_kkt(polished, gram * polished - xty) / scale;
  const bool take_polished =
      polished.allFinite() && polished.minCoeff() >= 0.0 &&
      std::abs(polished.sum() - 1.0) <= 1e-12 &&
      (polished_sse <= pg_sse * (1.0 + 1e-12) + 1e-300 || kkt_polished < kkt_pg);
  if (take_polished) w = polished;

  sol.weights = w.cwiseMax(0.0);
  sol.weights /= sol.weights.sum();
  sol.objective = detail::sse(x, y, sol.weights);
  sol.kkt_residual = detail::simplex_kkt(sol.weights, gram * sol.weights - xty) / scale;
  sol.iterations = iterations + polish_steps;
  if (sol.kkt_residual <= opts.kkt_tol) sol.hit_max_iterations = false;

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.weights(i) > 0.0) active.push_back(i);
  }
  sol.collinear = detail::columns_collinear(x, active);
  return sol;
}

/// Dispatch on the regime.
inline WeightSolution solve_weights(const Matrix& x, const Vector& y, const WeightRegime& regime) {
  regime.validate();
  switch (regime.variant) {
    case WeightVariant::Unrestricted: return solve_unrestricted(x, y, regime.include_intercept);
    case WeightVariant::SignedSumOne: return solve_sum_one(x, y);
    case WeightVariant::NonNegativeSumOne: return solve_simplex(x, y);
  }
  throw Error(ErrorCode::InvalidSpec, "unknown weight regime");
}

}  // namespace sbc
