#pragma once

// Starting points for the non-convex MM problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "gammareg/model_core.hpp"
#include "gammareg/random.hpp"

namespace gammareg {

inline constexpr double kInitSigma2Floor = 1e-10;

struct Initialization {
  ModelParams params;
  /// Scale estimate collapsed to zero and was replaced by the floor.
  bool degenerate = false;
};

struct RansacConfig {
  /// 0 selects p+2 (or min(n, max(p/2, 10)) when p+2 > n).
  Eigen::Index subset_size = 0;
  int trials = 200;
  std::uint64_t seed = 0;
};

struct RansacResult {
  Initialization init;
  double best_score = 0.0;
  std::size_t best_trial = 0;
  /// Best median squared residual after each trial (non-increasing).
  std::vector<double> score_history;
};

inline Eigen::Index default_subset_size(Eigen::Index n, Eigen::Index p) {
  if (p + 2 <= n) return p + 2;
  return std::min(n, std::max<Eigen::Index>(p / 2, 10));
}

namespace detail {

// Least squares with an intercept column; falls back to a
// ridge of 1e-6 * trace / dim when the normal matrix is singular.
inline Vector least_squares_with_intercept(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols() + 1;
  Matrix design(n, d);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Matrix normal = design.transpose() * design;
  const Vector rhs = design.transpose() * y;
  if (n >= d) {
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() == Eigen::Success) {
      const double rcond = llt.rcond();
      if (rcond > 1e-12) return llt.solve(rhs);
    }
  }
  const double ridge = 1e-6 * normal.trace() / static_cast<double>(d);
  normal.diagonal().array() += ridge > 0.0 ? ridge : 1e-6;
  return normal.ldlt().solve(rhs);
}

inline double median_squared(const Vector& r) {
  std::vector<double> sq(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) sq[static_cast<std::size_t>(i)] = r(i) * r(i);
  return median(std::move(sq));
}

inline double median_abs(const Vector& r) {
  std::vector<double> a(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r(i));
  return median(std::move(a));
}

}  // namespace detail

/// RANSAC-lite: least squares on random subsets scored by the median squared
/// residual over all rows.
inline RansacResult ransac_search(const Dataset& data, const RansacConfig& cfg) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (n < 3) throw DomainError("ransac_init needs at least 3 rows");
  if (cfg.trials < 1) throw ConfigError("ransac trials must be >= 1");
  const Eigen::Index m = cfg.subset_size > 0 ? std::min(cfg.subset_size, n) : default_subset_size(n, p);

  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  RansacResult out;
  out.best_score = std::numeric_limits<double>::infinity();
  Vector best_coef;
  for (int t = 0; t < cfg.trials; ++t) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first m entries form the subset.
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto j = static_cast<std::size_t>(k) + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - k)));
      std::swap(order[static_cast<std::size_t>(k)], order[j]);
    }
    std::vector<Eigen::Index> rows(order.begin(), order.begin() + m);
    std::sort(rows.begin(), rows.end());
    const Dataset sub = data.subset(rows);
    const Vector coef = detail::least_squares_with_intercept(sub.x, sub.y);
    if (coef.allFinite()) {
      const Vector r = (data.y - data.x * coef.tail(p)).array() - coef(0);
      const double score = detail::median_squared(r);
      if (score < out.best_score) {
        out.best_score = score;
        out.best_trial = static_cast<std::size_t>(t);
        best_coef = coef;
      }
    }
    out.score_history.push_back(out.best_score);
  }
  if (best_coef.size() == 0) throw DegenerateFitError("ransac: no trial produced finite coefficients");

  ModelParams params{best_coef(0), best_coef.tail(p), 1.0};
  const Vector r = residuals(data, params);
  const double mad = detail::median_abs(r);
  params.sigma2 = kMadConsistency * kMadConsistency * mad * mad;
  out.init.params = params;
  if (!(params.sigma2 >= kInitSigma2Floor)) {
    out.init.params.sigma2 = kInitSigma2Floor;
    out.init.degenerate = true;
  }
  return out;
}

inline Initialization ransac_init(const Dataset& data, Eigen::Index subset_size, int trials, std::uint64_t seed) {
  return ransac_search(data, RansacConfig{subset_size, trials, seed}).init;
}

/// beta = 0, beta0 = median(y), sigma2 = (1.4826 MAD(y))^2.
inline Initialization zero_init(const Dataset& data) {
  if (data.y.size() < 1) throw DomainError("zero_init: empty response");
  std::vector<double> ys(data.y.data(), data.y.data() + data.y.size());
  const double med = median(ys);
  std::vector<double> dev(ys.size());
  std::transform(ys.begin(), ys.end(), dev.begin(), [med](double v) { return std::abs(v - med); });
  const double mad = median(std::move(dev));
  Initialization out;
  out.params = ModelParams{med, Vector::Zero(data.p()), kMadConsistency * kMadConsistency * mad * mad};
  if (!(out.params.sigma2 >= kInitSigma2Floor)) {
    out.params.sigma2 = kInitSigma2Floor;
    out.degenerate = true;
  }
  return out;
}

}  // namespace gammareg
