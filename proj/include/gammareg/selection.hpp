#pragma once

// Lambda grid construction and robust cross-validation (gamma-cross-entropy
// scored K-fold CV) for the penalty weight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gammareg/model_core.hpp"
#include "gammareg/parallel.hpp"
#include "gammareg/random.hpp"
#include "gammareg/solver.hpp"

namespace gammareg {

/// How the top of the lambda grid is found.
enum class LambdaAnchor {
  /// lambda_zero: KKT bound at the self-consistent intercept-only model.
  null_model,
  /// lambda_escape: smallest lambda whose fit started at init is intercept-only.
  init_escape,
};

struct CvConfig {
  double gamma0 = 0.5;
  int folds = 10;
  bool leave_one_out = false;
  int grid_size = 50;
  double grid_floor_ratio = 0.05;
  std::uint64_t seed = 0;
  /// Start each lambda from the previous lambda's solution instead of from init.
  bool warm_start = false;
  LambdaAnchor anchor = LambdaAnchor::init_escape;
  /// Solver settings for every path fit; gamma and lambda are overridden.
  FitConfig fit;

  int effective_folds(Eigen::Index n) const { return leave_one_out ? static_cast<int>(n) : folds; }

  void validate(Eigen::Index n) const {
    if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("gamma0 must be positive");
    const int k = effective_folds(n);
    if (k < 2 || k > n) throw ConfigError("fold count must lie in [2, n]");
    if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
    if (!(grid_floor_ratio > 0.0 && grid_floor_ratio < 1.0)) throw ConfigError("grid_floor_ratio must lie in (0, 1)");
  }
};

struct FoldDiagnostics {
  bool ok = false;
  std::string error;
  int mm_iterations = 0;
  bool converged = false;
  double kkt_violation = 0.0;
};

struct CvReport {
  double lambda0 = 0.0;
  /// Descending.
  std::vector<double> lambda_grid;
  /// Cross-validation score per lambda; +inf where the lambda was excluded.
  std::vector<double> rocv_values;
  double best_lambda = 0.0;
  std::size_t best_index = 0;
  /// [lambda index][fold index]
  std::vector<std::vector<FoldDiagnostics>> fold_diagnostics;
  /// Full-data fit at every lambda (empty where it failed).
  std::vector<std::optional<ModelParams>> path;
  std::vector<int> fold_of_row;
  /// Full-data refit at best_lambda.
  FitResult final_fit;
};

/// Intercept + variance model (beta = 0) fitted to self-consistency.
struct NullModel {
  ModelParams params;
  MmWeights weights;
};

inline NullModel null_model_fit(const Dataset& data, double gamma, const ModelParams& init, int max_iters = 10000,
                                double tol = 1e-13) {
  data.validate();
  init.validate();
  ModelParams theta{init.beta0, Vector::Zero(data.p()), init.sigma2};
  MmWeights w;
  for (int it = 0; it < max_iters; ++it) {
    const Vector r = data.y.array() - theta.beta0;
    w = mm_weights_from_residuals(r, theta.sigma2, gamma);
    const double b0 = w.alpha.dot(data.y);
    const Vector r2 = data.y.array() - b0;
    const double s2 = (1.0 + gamma) * w.alpha.dot(r2.cwiseAbs2());
    if (!(s2 >= kSigma2ValidityFloor)) throw DegenerateFitError("null model variance collapsed", theta);
    const double change = std::max(std::abs(b0 - theta.beta0), std::abs(s2 - theta.sigma2));
    const double scale = std::max({1.0, std::abs(b0), s2});
    theta.beta0 = b0;
    theta.sigma2 = s2;
    if (change <= tol * scale) break;
  }
  w = mm_weights_from_residuals(data.y.array() - theta.beta0, theta.sigma2, gamma);
  return NullModel{theta, w};
}

/// Smallest lambda whose KKT condition keeps beta = 0 at the null model:
/// max_j |sum alpha_i (y_i - beta0) x_ij| / sigma2, rounded up by 1e-13
/// relative so that a fit at exactly lambda0 also returns beta = 0.
inline double lambda_zero(const Dataset& data, double gamma, const ModelParams& init) {
  const NullModel null = null_model_fit(data, gamma, init);
  const Vector wr = null.weights.alpha.cwiseProduct((data.y.array() - null.params.beta0).matrix());
  const Vector g = data.x.transpose() * wr;
  return (1.0 + 1e-13) * g.cwiseAbs().maxCoeff() / null.params.sigma2;
}

/// Smallest lambda for which the first MM subproblem started at `init` returns
/// beta = 0: max_j |sum alpha_i (y_i - b0) x_ij| / sigma2 with alpha and sigma2
/// taken at init and b0 = sum alpha_i y_i.
inline double lambda_zero_at_init(const Dataset& data, double gamma, const ModelParams& init) {
  const MmWeights w = mm_weights(data, init, gamma);
  const double b0 = w.alpha.dot(data.y);
  const Vector wr = w.alpha.cwiseProduct((data.y.array() - b0).matrix());
  return (data.x.transpose() * wr).cwiseAbs().maxCoeff() / init.sigma2;
}

/// Smallest lambda (to relative precision rel_tol) for which fit() started at
/// `init` returns beta = 0, found by bisection. A failed fit counts as nonzero.
inline double lambda_escape(const Dataset& data, double gamma, const ModelParams& init, const FitConfig& base = {},
                            double rel_tol = 1e-3) {
  FitConfig cfg = base;
  cfg.gamma = gamma;
  auto zero_at = [&](double lam) {
    cfg.lambda = lam;
    try {
      return fit(data, cfg, init).params.active_set().empty();
    } catch (const DegenerateFitError&) {
      return false;
    }
  };
  double hi = lambda_zero_at_init(data, gamma, init);
  if (!(hi > 0.0)) return 0.0;
  for (int k = 0; !zero_at(hi); ++k) {
    if (k == 60) throw DegenerateFitError("lambda_escape: no lambda shrinks the fit to zero");
    hi *= 2.0;
  }
  double lo = 0.0;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (zero_at(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// grid_size values log-uniform on [floor_ratio * lambda0, lambda0], descending.
inline std::vector<double> lambda_grid(double lambda0, int grid_size, double floor_ratio) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw DomainError("lambda_grid: lambda0 must be positive");
  if (grid_size < 1) throw ConfigError("lambda_grid: grid_size must be >= 1");
  if (!(floor_ratio > 0.0 && floor_ratio < 1.0)) throw ConfigError("lambda_grid: floor ratio must lie in (0, 1)");
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  if (grid_size == 1) {
    grid[0] = lambda0;
    return grid;
  }
  const double lo = std::log(floor_ratio);
  for (int k = 0; k < grid_size; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(grid_size - 1);
    grid[static_cast<std::size_t>(k)] = lambda0 * std::exp(frac * lo);
  }
  grid.front() = lambda0;
  grid.back() = lambda0 * floor_ratio;
  return grid;
}

inline std::vector<double> lambda_grid(double lambda0, const CvConfig& cfg) {
  return lambda_grid(lambda0, cfg.grid_size, cfg.grid_floor_ratio);
}

/// Fold id per row. Rows are first put in a canonical order (lexicographic on
/// (y, x)), then dealt round-robin after a seeded shuffle, so the assignment
/// follows row content rather than row position.
inline std::vector<int> fold_assignment(const Dataset& data, int folds, std::uint64_t seed) {
  const Eigen::Index n = data.n();
  if (folds < 2 || folds > n) throw ConfigError("fold count must lie in [2, n]");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (data.y(a) != data.y(b)) return data.y(a) < data.y(b);
    for (Eigen::Index j = 0; j < data.p(); ++j)
      if (data.x(a, j) != data.x(b, j)) return data.x(a, j) < data.x(b, j);
    return false;
  });
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) fold[static_cast<std::size_t>(order[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return fold;
}

/// Gamma-cross-entropy CV score from per-point predicted means and variances.
inline double rocv_score(const Vector& y, const Vector& mu, const Vector& sigma2, double gamma0) {
  if (!(gamma0 > 0.0)) throw DomainError("rocv_score: gamma0 must be positive");
  const Eigen::Index n = y.size();
  if (n == 0 || mu.size() != n || sigma2.size() != n) throw DomainError("rocv_score: size mismatch");
  std::vector<double> t(static_cast<std::size_t>(n));
  std::vector<double> log_pi(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    check_sigma2(sigma2(i));
    t[static_cast<std::size_t>(i)] = gamma0 * gaussian_log_density(y(i), mu(i), sigma2(i));
    log_pi[static_cast<std::size_t>(i)] = log_power_integral(sigma2(i), gamma0);
  }
  const double lse = log_sum_exp(t);
  if (!std::isfinite(lse)) throw DegenerateFitError("rocv_score: all density terms underflow");
  const double log_n = std::log(static_cast<double>(n));
  return -(lse - log_n) / gamma0 + (log_sum_exp(log_pi) - log_n) / (1.0 + gamma0);
}

/// Score with a fitted parameter set per held-out point.
inline double rocv_score(const Dataset& held_out, std::span<const ModelParams> params_per_point, double gamma0) {
  const Eigen::Index n = held_out.n();
  if (static_cast<Eigen::Index>(params_per_point.size()) != n) throw DomainError("rocv_score: one params per point");
  Vector mu(n), s2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = params_per_point[static_cast<std::size_t>(i)];
    mu(i) = p.beta0 + held_out.x.row(i).dot(p.beta);
    s2(i) = p.sigma2;
  }
  return rocv_score(held_out.y, mu, s2, gamma0);
}

namespace detail {

struct PathPoint {
  std::optional<ModelParams> params;
  FoldDiagnostics diag;
};

inline PathPoint fit_point(const Dataset& data, const FitConfig& cfg, const ModelParams& start) {
  PathPoint out;
  try {
    FitResult res = fit(data, cfg, start);
    out.diag = FoldDiagnostics{true, "", res.mm_iterations, res.converged, res.kkt_violation};
    out.params = std::move(res.params);
  } catch (const std::exception& e) {
    out.diag = FoldDiagnostics{false, e.what(), 0, false, 0.0};
  }
  return out;
}

// Fits at grid[k] for every k with wanted[k]. Warm starts chain through the
// last successful solution; cold starts all begin at init.
inline std::vector<PathPoint> solve_path(const Dataset& data, const std::vector<double>& grid, double gamma,
                                         const FitConfig& base, const ModelParams& init, bool warm,
                                         const std::vector<bool>& wanted) {
  std::vector<PathPoint> out(grid.size());
  ModelParams start = init;
  FitConfig cfg = base;
  cfg.gamma = gamma;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!wanted[k]) {
      out[k].diag = FoldDiagnostics{false, "skipped: full-data fit failed", 0, false, 0.0};
      continue;
    }
    cfg.lambda = grid[k];
    out[k] = fit_point(data, cfg, warm ? start : init);
    if (warm && out[k].params) start = *out[k].params;
  }
  return out;
}

}  // namespace detail

inline double grid_anchor(const Dataset& data, double gamma, const CvConfig& cfg, const ModelParams& init) {
  FitConfig fc = cfg.fit;
  fc.gamma = gamma;
  return cfg.anchor == LambdaAnchor::null_model ? lambda_zero(data, gamma, init) : lambda_escape(data, gamma, init, fc);
}

/// K-fold robust cross-validation over a log-uniform lambda grid. Fold fits
/// are only run at lambdas whose full-data fit succeeded, since the others
/// are excluded from the argmin anyway.
inline CvReport cross_validate(const Dataset& data, double gamma, const CvConfig& cfg, const ModelParams& init) {
  data.validate();
  cfg.validate(data.n());
  GammaConfig{gamma, 0.0}.validate();
  const int k_folds = cfg.effective_folds(data.n());

  CvReport report;
  report.lambda0 = grid_anchor(data, gamma, cfg, init);
  if (!(report.lambda0 > 0.0)) throw DegenerateFitError("cross_validate: lambda0 is zero (no predictor carries signal)");
  report.lambda_grid = lambda_grid(report.lambda0, cfg);
  if (cfg.leave_one_out) {
    report.fold_of_row.resize(static_cast<std::size_t>(data.n()));
    std::iota(report.fold_of_row.begin(), report.fold_of_row.end(), 0);
  } else {
    report.fold_of_row = fold_assignment(data, k_folds, cfg.seed);
  }

  std::vector<std::vector<Eigen::Index>> train_rows(static_cast<std::size_t>(k_folds));
  std::vector<std::vector<Eigen::Index>> test_rows(static_cast<std::size_t>(k_folds));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int f = report.fold_of_row[static_cast<std::size_t>(i)];
    for (int k = 0; k < k_folds; ++k) (k == f ? test_rows : train_rows)[static_cast<std::size_t>(k)].push_back(i);
  }

  const auto& grid = report.lambda_grid;
  const std::size_t n_grid = grid.size();
  const auto full = detail::solve_path(data, grid, gamma, cfg.fit, init, cfg.warm_start, std::vector<bool>(n_grid, true));
  std::vector<bool> wanted(n_grid);
  for (std::size_t l = 0; l < n_grid; ++l) wanted[l] = full[l].params.has_value();

  std::vector<std::vector<detail::PathPoint>> folds(static_cast<std::size_t>(k_folds));
  parallel_for(folds.size(), [&](std::size_t k) {
    folds[k] = detail::solve_path(data.subset(train_rows[k]), grid, gamma, cfg.fit, init, cfg.warm_start, wanted);
  });

  report.rocv_values.assign(n_grid, std::numeric_limits<double>::infinity());
  report.fold_diagnostics.assign(n_grid, std::vector<FoldDiagnostics>(static_cast<std::size_t>(k_folds)));
  report.path.resize(n_grid);
  for (std::size_t l = 0; l < n_grid; ++l) {
    report.path[l] = full[l].params;
    bool usable = full[l].params.has_value();
    for (std::size_t k = 0; k < folds.size(); ++k) {
      report.fold_diagnostics[l][k] = folds[k][l].diag;
      usable = usable && folds[k][l].params.has_value();
    }
    if (!usable) continue;
    const double s2_full = full[l].params->sigma2;
    Vector mu(data.n());
    for (std::size_t k = 0; k < folds.size(); ++k) {
      const ModelParams& pk = *folds[k][l].params;
      for (Eigen::Index i : test_rows[k]) mu(i) = pk.beta0 + data.x.row(i).dot(pk.beta);
    }
    try {
      report.rocv_values[l] = rocv_score(data.y, mu, Vector::Constant(data.n(), s2_full), cfg.gamma0);
    } catch (const std::exception&) {
      report.rocv_values[l] = std::numeric_limits<double>::infinity();
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t l = 0; l < n_grid; ++l) {
    if (!std::isfinite(report.rocv_values[l])) continue;
    if (!best || report.rocv_values[l] < report.rocv_values[*best]) best = l;
  }
  if (!best) throw DegenerateFitError("cross_validate: every lambda failed");
  report.best_index = *best;
  report.best_lambda = grid[*best];

  FitConfig final_cfg = cfg.fit;
  final_cfg.gamma = gamma;
  final_cfg.lambda = report.best_lambda;
  report.final_fit = fit(data, final_cfg, *report.path[*best]);
  return report;
}

}  // namespace gammareg
