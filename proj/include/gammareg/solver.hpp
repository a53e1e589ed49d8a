#pragma once

// MM outer loop with an active-set coordinate-descent inner loop for the
// L1-penalized gamma-linear regression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <vector>

#include "gammareg/model_core.hpp"

namespace gammareg {

struct FitConfig {
  double gamma = 0.1;
  double lambda = 0.0;
  int max_mm_iters = 500;
  /// Cap on coordinate-descent sweeps per MM step (and on active-set rounds).
  int max_cd_sweeps = 100;
  /// Relative loss change, denominator max(1, |loss|).
  double tol_loss = 1e-7;
  /// Max absolute change over (beta0, beta, sigma2).
  double tol_param = 1e-8;
  double sigma2_floor = 1e-10;
  /// A fit only counts as converged once check_kkt is at most this.
  double kkt_tol = 1e-5;
  /// Fit on column-standardized predictors and back-transform.
  bool standardize = false;

  GammaConfig gamma_config() const { return GammaConfig{gamma, lambda}; }

  void validate() const {
    gamma_config().validate();
    if (max_mm_iters < 1 || max_cd_sweeps < 1) throw ConfigError("iteration caps must be >= 1");
    if (!(tol_loss > 0.0) || !(tol_param > 0.0) || !(kkt_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(sigma2_floor > 0.0)) throw ConfigError("sigma2_floor must be positive");
  }
};

struct FitResult {
  ModelParams params;
  /// Penalized loss at the start point and after every accepted MM step.
  std::vector<double> loss_trajectory;
  std::vector<Eigen::Index> active_set;
  int mm_iterations = 0;
  bool converged = false;
  double kkt_violation = 0.0;
  /// Variance floor was hit at least once.
  bool degenerate = false;
  /// Some predictor had zero weighted norm; its coefficient was pinned to 0.
  bool zero_column = false;
  /// MM steps whose loss rose by more than the descent slack (never accepted).
  int rejected_steps = 0;
};

/// Process-wide record of MM descent behavior across every fit.
class DescentMonitor {
 public:
  void record_step(double increase) {
    std::lock_guard lock(mu_);
    ++steps_;
    max_increase_ = std::max(max_increase_, increase);
  }
  void record_fit() {
    std::lock_guard lock(mu_);
    ++fits_;
  }
  std::int64_t steps() const {
    std::lock_guard lock(mu_);
    return steps_;
  }
  std::int64_t fits() const {
    std::lock_guard lock(mu_);
    return fits_;
  }
  /// Largest observed L(theta_{m+1}) - L(theta_m) before any step rejection.
  double max_increase() const {
    std::lock_guard lock(mu_);
    return max_increase_;
  }
  void reset() {
    std::lock_guard lock(mu_);
    steps_ = 0;
    fits_ = 0;
    max_increase_ = -std::numeric_limits<double>::infinity();
  }

 private:
  mutable std::mutex mu_;
  std::int64_t steps_ = 0;
  std::int64_t fits_ = 0;
  double max_increase_ = -std::numeric_limits<double>::infinity();
};

inline DescentMonitor& descent_monitor() {
  static DescentMonitor monitor;
  return monitor;
}

inline constexpr double kDescentSlack = 1e-10;

/// sign(t) * max(|t| - thr, 0); |t| == thr maps to 0.
inline double soft_threshold(double t, double thr) {
  if (t > thr) return t - thr;
  if (t < -thr) return t + thr;
  return 0.0;
}

inline double update_intercept(const Dataset& data, const Vector& beta, const MmWeights& weights) {
  const Vector partial = data.y - data.x * beta;
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < partial.size(); ++i) acc.add(weights.alpha(i) * partial(i));
  return acc.value();
}

/// Coordinate update for beta_j with weights and sigma2 frozen. Returns 0 for
/// a column with zero weighted norm.
inline double update_coefficient(Eigen::Index j, const Dataset& data, const ModelParams& params,
                                 const MmWeights& weights, double lambda) {
  const auto col = data.x.col(j);
  CompensatedSum num;
  CompensatedSum den;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double partial = data.x.row(i).dot(params.beta) - col(i) * params.beta(j);
    num.add(weights.alpha(i) * (data.y(i) - params.beta0 - partial) * col(i));
    den.add(weights.alpha(i) * col(i) * col(i));
  }
  if (!(den.value() > 0.0)) return 0.0;
  return soft_threshold(num.value(), params.sigma2 * lambda) / den.value();
}

/// (1 + gamma) * sum alpha_i r_i^2, floored at sigma2_floor.
inline double update_variance(const Dataset& data, const ModelParams& params, const MmWeights& weights,
                              double gamma, double sigma2_floor = 1e-10) {
  const Vector r = residuals(data, params);
  if ((r.array() == 0.0).all()) throw DegenerateFitError("all residuals are zero", params);
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < r.size(); ++i) acc.add(weights.alpha(i) * r(i) * r(i));
  return std::max((1.0 + gamma) * acc.value(), sigma2_floor);
}

namespace detail {

// Coordinate descent on the weighted least squares part of h_MM with the
// residual vector maintained incrementally.
class CoordinateDescent {
 public:
  CoordinateDescent(const Matrix& x, const Vector& alpha, ModelParams& params, Vector& resid, double lambda)
      : x_(x), alpha_(alpha), params_(params), resid_(resid), threshold_(params.sigma2 * lambda) {
    col_norm_ = x_.cwiseAbs2().transpose() * alpha_;
  }

  double update_intercept() {
    const double delta = alpha_.dot(resid_);
    if (delta != 0.0) {
      params_.beta0 += delta;
      resid_.array() -= delta;
    }
    return std::abs(delta);
  }

  double update(Eigen::Index j) {
    const double old = params_.beta(j);
    double fresh = 0.0;
    if (col_norm_(j) > 0.0) {
      const double t = x_.col(j).dot(alpha_.cwiseProduct(resid_)) + old * col_norm_(j);
      fresh = soft_threshold(t, threshold_) / col_norm_(j);
    } else {
      zero_column_ = true;
    }
    if (fresh != old) {
      params_.beta(j) = fresh;
      resid_ -= (fresh - old) * x_.col(j);
    }
    return std::abs(fresh - old);
  }

  template <typename Indices>
  double sweep(const Indices& coords) {
    double change = update_intercept();
    for (Eigen::Index j : coords) change = std::max(change, update(j));
    return change;
  }

  double sweep_all() {
    double change = update_intercept();
    for (Eigen::Index j = 0; j < x_.cols(); ++j) change = std::max(change, update(j));
    return change;
  }

  bool zero_column() const { return zero_column_; }

 private:
  const Matrix& x_;
  const Vector& alpha_;
  ModelParams& params_;
  Vector& resid_;
  double threshold_;
  Vector col_norm_;
  bool zero_column_ = false;
};

inline double max_param_change(const ModelParams& a, const ModelParams& b) {
  double d = std::max(std::abs(a.beta0 - b.beta0), std::abs(a.sigma2 - b.sigma2));
  if (a.beta.size() > 0) d = std::max(d, (a.beta - b.beta).cwiseAbs().maxCoeff());
  return d;
}

struct Standardization {
  Vector mean;
  Vector scale;
};

inline Standardization column_standardization(const Matrix& x) {
  Standardization s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / (n - 1.0);
    s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

}  // namespace detail

/// One pass: beta0, then each beta_j in ascending order (only currently
/// nonzero coordinates when active_only).
inline ModelParams cd_sweep(const Dataset& data, const ModelParams& params, const MmWeights& weights,
                            double lambda, bool active_only) {
  detail::check_shapes(data, params);
  ModelParams out = params;
  Vector resid = residuals(data, out);
  detail::CoordinateDescent cd(data.x, weights.alpha, out, resid, lambda);
  if (active_only) {
    cd.sweep(params.active_set());
  } else {
    cd.sweep_all();
  }
  return out;
}

/// Max KKT slack of the h_MM subproblem at self-consistent weights, divided by
/// sigma2 (gradient units of h_MM): |g_j + lambda sigma2 sign(beta_j)| on the
/// support, (|g_j| - lambda sigma2)_+ off it, with g_j = -sum alpha_i r_i x_ij.
/// The intercept contributes |sum alpha_i r_i|.
inline double check_kkt(const Dataset& data, const ModelParams& params, const GammaConfig& cfg) {
  detail::check_shapes(data, params);
  const Vector r = residuals(data, params);
  const MmWeights w = mm_weights_from_residuals(r, params.sigma2, cfg.gamma);
  const Vector wr = w.alpha.cwiseProduct(r);
  const Vector grad = -(data.x.transpose() * wr);
  const double thr = cfg.lambda * params.sigma2;
  double slack = std::abs(wr.sum());
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    const double s = params.beta(j) != 0.0 ? std::abs(grad(j) + thr * sign(params.beta(j)))
                                           : std::max(std::abs(grad(j)) - thr, 0.0);
    slack = std::max(slack, s);
  }
  return slack / params.sigma2;
}

namespace detail {

inline FitResult fit_raw(const Dataset& data, const FitConfig& cfg, const ModelParams& init) {
  FitResult result;
  ModelParams theta = init;
  Vector resid = residuals(data, theta);
  double loss = gamma_cross_entropy_from_residuals(resid, theta.sigma2, cfg.gamma) + cfg.lambda * theta.l1_norm();
  result.loss_trajectory.push_back(loss);
  int consecutive_floor = 0;

  for (int m = 0; m < cfg.max_mm_iters; ++m) {
    MmWeights w;
    try {
      w = mm_weights_from_residuals(resid, theta.sigma2, cfg.gamma);
    } catch (const DegenerateFitError& e) {
      throw DegenerateFitError(e.what(), theta);
    }

    ModelParams next = theta;
    Vector next_resid = resid;
    CoordinateDescent cd(data.x, w.alpha, next, next_resid, cfg.lambda);
    for (int round = 0; round < cfg.max_cd_sweeps; ++round) {
      const auto active = next.active_set();
      for (int s = 0; s < cfg.max_cd_sweeps; ++s) {
        if (cd.sweep(active) < cfg.tol_param) break;
      }
      cd.sweep_all();
      const auto grown = next.active_set();
      const bool enlarged = std::any_of(grown.begin(), grown.end(), [&](Eigen::Index j) {
        return !std::binary_search(active.begin(), active.end(), j);
      });
      if (!enlarged) break;
    }
    result.zero_column = result.zero_column || cd.zero_column();

    double wss = 0.0;
    {
      CompensatedSum acc;
      for (Eigen::Index i = 0; i < next_resid.size(); ++i) acc.add(w.alpha(i) * next_resid(i) * next_resid(i));
      wss = acc.value();
    }
    if (wss == 0.0) throw DegenerateFitError("perfect interpolation: all weighted residuals are zero", theta);
    next.sigma2 = (1.0 + cfg.gamma) * wss;
    if (next.sigma2 < cfg.sigma2_floor) {
      next.sigma2 = cfg.sigma2_floor;
      result.degenerate = true;
      if (++consecutive_floor >= 2) throw DegenerateFitError("variance floor hit repeatedly", theta);
    } else {
      consecutive_floor = 0;
    }

    double next_loss = 0.0;
    try {
      next_loss = gamma_cross_entropy_from_residuals(next_resid, next.sigma2, cfg.gamma) +
                  cfg.lambda * next.l1_norm();
    } catch (const DegenerateFitError& e) {
      throw DegenerateFitError(e.what(), theta);
    }
    descent_monitor().record_step(next_loss - loss);
    if (next_loss > loss + kDescentSlack) {
      ++result.rejected_steps;
      break;
    }

    const double dparam = max_param_change(theta, next);
    const double dloss = std::abs(loss - next_loss) / std::max(1.0, std::abs(loss));
    theta = std::move(next);
    resid = std::move(next_resid);
    loss = next_loss;
    result.loss_trajectory.push_back(loss);
    result.mm_iterations = m + 1;
    if ((dloss < cfg.tol_loss || dparam < cfg.tol_param) && check_kkt(data, theta, cfg.gamma_config()) <= cfg.kkt_tol) {
      result.converged = !result.degenerate;
      break;
    }
  }
  result.params = std::move(theta);
  return result;
}

}  // namespace detail

/// Sparse gamma-linear regression by MM with active-set coordinate descent.
/// Throws DegenerateFitError (carrying the last valid iterate) when the
/// variance collapses or every density weight underflows.
inline FitResult fit(const Dataset& data, const FitConfig& cfg, const ModelParams& init) {
  data.validate();
  cfg.validate();
  init.validate();
  detail::check_shapes(data, init);
  descent_monitor().record_fit();

  if (!cfg.standardize) {
    FitResult res = detail::fit_raw(data, cfg, init);
    res.active_set = res.params.active_set();
    res.kkt_violation = check_kkt(data, res.params, cfg.gamma_config());
    return res;
  }

  const auto st = detail::column_standardization(data.x);
  Dataset scaled = data;
  scaled.x = (data.x.rowwise() - st.mean.transpose()).array().rowwise() / st.scale.transpose().array();
  ModelParams sinit = init;
  sinit.beta = init.beta.cwiseProduct(st.scale);
  sinit.beta0 = init.beta0 + st.mean.dot(init.beta);
  FitResult res = detail::fit_raw(scaled, cfg, sinit);
  res.kkt_violation = check_kkt(scaled, res.params, cfg.gamma_config());
  ModelParams& p = res.params;
  p.beta = p.beta.cwiseQuotient(st.scale);
  p.beta0 -= st.mean.dot(p.beta);
  res.active_set = p.active_set();
  return res;
}

}  // namespace gammareg
