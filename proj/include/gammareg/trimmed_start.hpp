#pragma once

// Concentration-step start for designs where RANSAC subsets cannot be solved
// exactly (p + 2 > n): Lasso support on the h best-fitting rows, least-squares
// refit on that support, re-trim, repeat until the trimmed sum of squares stops
// improving.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gammareg/baselines.hpp"
#include "gammareg/initializers.hpp"

namespace gammareg {

struct TrimmedStartConfig {
  /// Fraction of rows kept in each concentration step.
  double keep = 0.5;
  int max_steps = 20;
  /// Extra starts from random h-row subsets, besides the full-data start.
  int random_starts = 10;
  /// Folds for the Lasso CV that picks the support.
  int folds = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("trimmed start: keep must lie in (0, 1]");
    if (max_steps < 1) throw ConfigError("trimmed start: max_steps must be >= 1");
    if (random_starts < 0) throw ConfigError("trimmed start: random_starts must be >= 0");
    if (folds < 2) throw ConfigError("trimmed start: folds must be >= 2");
  }
};

struct TrimmedStartResult {
  Initialization init;
  /// Final trimmed sum of squares of each start (index 0 is the full-data start).
  std::vector<double> trimmed_ss;
  std::size_t best_start = 0;
  int steps = 0;
};

namespace detail {

inline std::vector<Eigen::Index> smallest_abs_rows(const Vector& r, Eigen::Index h) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(r.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  idx.resize(static_cast<std::size_t>(h));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double trimmed_ss(const Vector& r, Eigen::Index h) {
  std::vector<double> sq(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) sq[static_cast<std::size_t>(i)] = r(i) * r(i);
  std::sort(sq.begin(), sq.end());
  sq.resize(static_cast<std::size_t>(h));
  return compensated_sum(sq);
}

// Lasso-CV support on `sub`, then least squares on that support.
inline ModelParams relaxed_lasso(const Dataset& sub, int folds, std::uint64_t seed) {
  CvConfig cv;
  cv.folds = std::min<int>(folds, static_cast<int>(sub.n()));
  cv.seed = seed;
  ModelParams out = lasso_cv(sub, cv).final_fit.params;
  const auto act = out.active_set();
  if (act.empty() || static_cast<Eigen::Index>(act.size()) + 1 >= sub.n()) return out;
  Matrix xs(sub.n(), static_cast<Eigen::Index>(act.size()));
  for (std::size_t k = 0; k < act.size(); ++k) xs.col(static_cast<Eigen::Index>(k)) = sub.x.col(act[k]);
  const Vector coef = least_squares_with_intercept(xs, sub.y);
  out.beta.setZero();
  out.beta0 = coef(0);
  for (std::size_t k = 0; k < act.size(); ++k) out.beta(act[k]) = coef(static_cast<Eigen::Index>(k) + 1);
  return out;
}

}  // namespace detail

inline TrimmedStartResult trimmed_start(const Dataset& data, const TrimmedStartConfig& cfg = {}) {
  data.validate();
  cfg.validate();
  const Eigen::Index n = data.n();
  if (n < 4) throw DomainError("trimmed start needs at least 4 rows");
  const Eigen::Index h = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(cfg.keep * static_cast<double>(n))), 3, n);

  TrimmedStartResult out;
  ModelParams best;
  double best_ss = std::numeric_limits<double>::infinity();
  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int s = 0; s <= cfg.random_starts; ++s) {
    ModelParams cur;
    if (s == 0) {
      cur = detail::relaxed_lasso(data, cfg.folds, cfg.seed);
    } else {
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      rng.shuffle(order);
      std::vector<Eigen::Index> rows(order.begin(), order.begin() + h);
      std::sort(rows.begin(), rows.end());
      cur = detail::relaxed_lasso(data.subset(rows), cfg.folds, cfg.seed);
    }
    double cur_ss = detail::trimmed_ss(residuals(data, cur), h);
    for (int step = 0; step < cfg.max_steps; ++step) {
      const auto rows = detail::smallest_abs_rows(residuals(data, cur), h);
      const ModelParams cand = detail::relaxed_lasso(data.subset(rows), cfg.folds, cfg.seed);
      const double ss = detail::trimmed_ss(residuals(data, cand), h);
      ++out.steps;
      if (!(ss < cur_ss)) break;
      cur = cand;
      cur_ss = ss;
    }
    out.trimmed_ss.push_back(cur_ss);
    if (cur_ss < best_ss) {
      best_ss = cur_ss;
      best = cur;
      out.best_start = static_cast<std::size_t>(s);
    }
  }

  const double mad = detail::median_abs(residuals(data, best));
  best.sigma2 = kMadConsistency * kMadConsistency * mad * mad;
  out.init.params = best;
  if (!(best.sigma2 >= kInitSigma2Floor)) {
    out.init.params.sigma2 = kInitSigma2Floor;
    out.init.degenerate = true;
  }
  return out;
}

enum class InitKind { ransac, zero, trimmed };

inline std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::ransac:
      return "ransac";
    case InitKind::zero:
      return "zero";
    default:
      return "trimmed";
  }
}

inline InitKind parse_init(const std::string& s) {
  if (s == "ransac") return InitKind::ransac;
  if (s == "zero") return InitKind::zero;
  if (s == "trimmed") return InitKind::trimmed;
  throw ConfigError("unknown initializer '" + s + "' (expected ransac, zero or trimmed)");
}

/// Builds a start point; `trials` applies to RANSAC only.
inline Initialization make_start(InitKind kind, const Dataset& data, std::uint64_t seed, int trials = 200) {
  switch (kind) {
    case InitKind::ransac:
      return ransac_init(data, 0, trials, seed);
    case InitKind::zero:
      return zero_init(data);
    default: {
      TrimmedStartConfig cfg;
      cfg.seed = seed;
      return trimmed_start(data, cfg).init;
    }
  }
}

}  // namespace gammareg
