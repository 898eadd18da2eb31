#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sbc/error.hpp"

namespace sbc::linalg {

/// Relative singular-value cutoff shared by every least-squares solve.
inline constexpr double kRankCutoff = 1e-12;

struct LeastSquares {
  Eigen::VectorXd coef;
  int rank = 0;
  bool rank_deficient = false;
  double smallest_singular_value = 0.0;
};

/// Minimum-norm least squares via SVD, dropping singular values below
/// `cutoff * sigma_max`.
inline LeastSquares lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          double cutoff = kRankCutoff) {
  if (a.rows() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lstsq: design rows and response length differ");
  }
  LeastSquares out;
  out.coef = Eigen::VectorXd::Zero(a.cols());
  if (a.cols() == 0 || a.rows() == 0) return out;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  out.smallest_singular_value = s.size() > 0 ? s(s.size() - 1) : 0.0;
  if (smax == 0.0) {
    out.rank_deficient = true;
    return out;
  }
  const Eigen::VectorXd utb = svd.matrixU().transpose() * b;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff * smax) {
      scaled(k) = utb(k) / s(k);
      ++out.rank;
    }
  }
  out.coef = svd.matrixV() * scaled;
  out.rank_deficient = out.rank < std::min(a.rows(), a.cols());
  return out;
}

/// Moore-Penrose pseudo-inverse of the Gram matrix X'X, computed from the SVD of X.
inline Eigen::MatrixXd gram_pinv(const Eigen::MatrixXd& x, double cutoff = kRankCutoff) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (smax > 0.0 && s(k) > cutoff * smax) inv(k) = 1.0 / (s(k) * s(k));
  }
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  const Eigen::MatrixXd& v = svd.matrixV();
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (inv(k) != 0.0) pinv.noalias() += inv(k) * v.col(k) * v.col(k).transpose();
  }
  return pinv;
}

/// Pairwise summation; result depends only on the order of `values`.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const auto half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace sbc::linalg
