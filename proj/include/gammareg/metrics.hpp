#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "gammareg/model_core.hpp"

namespace gammareg {

namespace detail {

inline std::vector<double> squared_prediction_errors(const Dataset& test, const ModelParams& params) {
  check_shapes(test, params);
  const Vector r = residuals(test, params);
  std::vector<double> sq(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) sq[static_cast<std::size_t>(i)] = r(i) * r(i);
  return sq;
}

}  // namespace detail

/// Root mean squared prediction error; predictions include the intercept.
inline double rmspe(const Dataset& test, const ModelParams& params) {
  if (test.n() == 0) throw DomainError("rmspe: empty test set");
  auto sq = detail::squared_prediction_errors(test, params);
  return std::sqrt(order_free_sum(std::move(sq)) / static_cast<double>(test.n()));
}

/// Mean squared coefficient error over (beta0, beta1..p).
inline double mse_coefficients(const Vector& true_beta, const Vector& est_beta) {
  if (true_beta.size() != est_beta.size() || true_beta.size() == 0)
    throw DomainError("mse_coefficients: length mismatch");
  return (true_beta - est_beta).squaredNorm() / static_cast<double>(true_beta.size());
}

inline Vector stacked_coefficients(const ModelParams& params) {
  Vector out(params.beta.size() + 1);
  out(0) = params.beta0;
  out.tail(params.beta.size()) = params.beta;
  return out;
}

struct SupportRates {
  double tpr = 0.0;
  double tnr = 0.0;
};

/// Support recovery over coefficients 1..p (no intercept), exact-zero test.
/// A rate whose denominator is empty is reported as 1.
inline SupportRates tpr_tnr(const Vector& true_beta, const Vector& est_beta) {
  if (true_beta.size() != est_beta.size()) throw DomainError("tpr_tnr: length mismatch");
  int pos = 0, neg = 0, tp = 0, tn = 0;
  for (Eigen::Index j = 0; j < true_beta.size(); ++j) {
    if (true_beta(j) != 0.0) {
      ++pos;
      if (est_beta(j) != 0.0) ++tp;
    } else {
      ++neg;
      if (est_beta(j) == 0.0) ++tn;
    }
  }
  return SupportRates{pos ? static_cast<double>(tp) / pos : 1.0, neg ? static_cast<double>(tn) / neg : 1.0};
}

/// Number of smallest squared errors kept: floor((n + 1)(1 - trim)), clamped to [1, n].
inline std::size_t trimmed_count(std::size_t n, double trim) {
  const auto h = static_cast<std::size_t>(std::floor(static_cast<double>(n + 1) * (1.0 - trim)));
  return std::clamp<std::size_t>(h, 1, n);
}

/// Root trimmed mean squared prediction error.
inline double rtmspe(const Dataset& test, const ModelParams& params, double trim) {
  if (test.n() == 0) throw DomainError("rtmspe: empty test set");
  if (!(trim >= 0.0 && trim < 1.0)) throw DomainError("rtmspe: trim must lie in [0, 1)");
  auto sq = detail::squared_prediction_errors(test, params);
  std::sort(sq.begin(), sq.end());
  const std::size_t h = trimmed_count(sq.size(), trim);
  sq.resize(h);
  return std::sqrt(compensated_sum(sq) / static_cast<double>(h));
}

}  // namespace gammareg
