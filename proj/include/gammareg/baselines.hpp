#pragma once

// Plain (non-robust) Lasso comparator: cyclic coordinate descent on
// (1/2n) sum (y_i - beta0 - x_i'beta)^2 + lambda ||beta||_1.

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "gammareg/model_core.hpp"
#include "gammareg/parallel.hpp"
#include "gammareg/selection.hpp"
#include "gammareg/solver.hpp"

namespace gammareg {

struct LassoConfig {
  double tol = 1e-10;
  int max_sweeps = 100000;
};

inline double lasso_objective(const Dataset& data, const ModelParams& params, double lambda) {
  const Vector r = residuals(data, params);
  return 0.5 * r.squaredNorm() / static_cast<double>(data.n()) + lambda * params.l1_norm();
}

/// Smallest lambda with beta = 0 optimal: max_j |n^-1 sum x_ij (y_i - ybar)|.
inline double lasso_lambda_max(const Dataset& data) {
  const Vector centered = data.y.array() - data.y.mean();
  return (data.x.transpose() * centered).cwiseAbs().maxCoeff() / static_cast<double>(data.n());
}

/// Cyclic coordinate descent from `start` (zero coefficients when omitted).
/// sigma2 in the result is the mean squared residual.
inline FitResult lasso_fit(const Dataset& data, double lambda, const LassoConfig& cfg = {},
                           const std::optional<ModelParams>& start = std::nullopt) {
  data.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lasso: lambda must be >= 0");
  if (!(cfg.tol > 0.0) || cfg.max_sweeps < 1) throw ConfigError("lasso: invalid tolerance or sweep cap");
  const Eigen::Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);

  ModelParams theta = start ? *start : ModelParams{data.y.mean(), Vector::Zero(data.p()), 1.0};
  detail::check_shapes(data, theta);
  Vector resid = residuals(data, theta);
  const Vector col_norm = data.x.colwise().squaredNorm().transpose() * inv_n;

  FitResult res;
  res.loss_trajectory.push_back(0.5 * resid.squaredNorm() * inv_n + lambda * theta.l1_norm());
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double change = 0.0;
    const double d0 = resid.sum() * inv_n;
    theta.beta0 += d0;
    resid.array() -= d0;
    change = std::abs(d0);
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      const double old = theta.beta(j);
      double fresh = 0.0;
      if (col_norm(j) > 0.0) {
        const double t = data.x.col(j).dot(resid) * inv_n + old * col_norm(j);
        fresh = soft_threshold(t, lambda) / col_norm(j);
      } else {
        res.zero_column = true;
      }
      if (fresh != old) {
        theta.beta(j) = fresh;
        resid -= (fresh - old) * data.x.col(j);
        change = std::max(change, std::abs(fresh - old));
      }
    }
    res.loss_trajectory.push_back(0.5 * resid.squaredNorm() * inv_n + lambda * theta.l1_norm());
    res.mm_iterations = sweep + 1;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  theta.sigma2 = std::max(resid.squaredNorm() * inv_n, kSigma2ValidityFloor);
  res.params = theta;
  res.active_set = theta.active_set();

  // Lasso KKT: |n^-1 x_j'r - lambda sign(beta_j)| on the support, (|n^-1 x_j'r| - lambda)_+ off it.
  const Vector g = data.x.transpose() * resid * inv_n;
  double slack = std::abs(resid.sum() * inv_n);
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    slack = std::max(slack, theta.beta(j) != 0.0 ? std::abs(g(j) - lambda * sign(theta.beta(j)))
                                                 : std::max(std::abs(g(j)) - lambda, 0.0));
  }
  res.kkt_violation = slack;
  return res;
}

/// K-fold CV on mean squared prediction error over an explicit descending grid.
/// rocv_values holds the CV mean squared error.
inline CvReport lasso_cv(const Dataset& data, int folds, const std::vector<double>& grid, std::uint64_t seed = 0,
                         const LassoConfig& cfg = {}) {
  data.validate();
  if (grid.empty()) throw ConfigError("lasso_cv: empty grid");
  CvReport report;
  report.lambda_grid = grid;
  report.lambda0 = grid.front();
  report.fold_of_row = fold_assignment(data, folds, seed);

  std::vector<std::vector<Eigen::Index>> train_rows(static_cast<std::size_t>(folds));
  std::vector<std::vector<Eigen::Index>> test_rows(static_cast<std::size_t>(folds));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int f = report.fold_of_row[static_cast<std::size_t>(i)];
    for (int k = 0; k < folds; ++k) (k == f ? test_rows : train_rows)[static_cast<std::size_t>(k)].push_back(i);
  }

  const std::size_t n_grid = grid.size();
  std::vector<std::vector<double>> sq_err(static_cast<std::size_t>(folds), std::vector<double>(n_grid, 0.0));
  report.fold_diagnostics.assign(n_grid, std::vector<FoldDiagnostics>(static_cast<std::size_t>(folds)));
  parallel_for(static_cast<std::size_t>(folds), [&](std::size_t k) {
    const Dataset train = data.subset(train_rows[k]);
    std::optional<ModelParams> start;
    for (std::size_t l = 0; l < n_grid; ++l) {
      const FitResult r = lasso_fit(train, grid[l], cfg, start);
      start = r.params;
      report.fold_diagnostics[l][k] = FoldDiagnostics{true, "", r.mm_iterations, r.converged, r.kkt_violation};
      CompensatedSum acc;
      for (Eigen::Index i : test_rows[k]) {
        const double e = data.y(i) - r.params.beta0 - data.x.row(i).dot(r.params.beta);
        acc.add(e * e);
      }
      sq_err[k][l] = acc.value();
    }
  });

  report.rocv_values.assign(n_grid, 0.0);
  for (std::size_t l = 0; l < n_grid; ++l) {
    CompensatedSum acc;
    for (int k = 0; k < folds; ++k) acc.add(sq_err[static_cast<std::size_t>(k)][l]);
    report.rocv_values[l] = acc.value() / static_cast<double>(data.n());
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < n_grid; ++l)
    if (report.rocv_values[l] < report.rocv_values[best]) best = l;
  report.best_index = best;
  report.best_lambda = grid[best];

  report.path.resize(n_grid);
  std::optional<ModelParams> start;
  for (std::size_t l = 0; l <= best; ++l) {
    FitResult r = lasso_fit(data, grid[l], cfg, start);
    start = r.params;
    report.path[l] = r.params;
    if (l == best) report.final_fit = std::move(r);
  }
  return report;
}

/// K-fold CV with a grid built from lasso_lambda_max.
inline CvReport lasso_cv(const Dataset& data, const CvConfig& cfg, const LassoConfig& lcfg = {}) {
  cfg.validate(data.n());
  const double lmax = lasso_lambda_max(data);
  const auto grid = lambda_grid(lmax, cfg);
  return lasso_cv(data, cfg.effective_folds(data.n()), grid, cfg.seed, lcfg);
}

}  // namespace gammareg
