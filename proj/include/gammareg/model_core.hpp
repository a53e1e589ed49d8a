#pragma once

// Gaussian linear model, empirical gamma-cross entropy, penalized loss and
// the MM surrogate built from it.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gammareg/errors.hpp"
#include "gammareg/numeric.hpp"

namespace gammareg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest variance accepted before taking logarithms.
inline constexpr double kSigma2ValidityFloor = 1e-12;

struct Dataset {
  Vector y;
  Matrix x;
  /// Optional ground truth, index 0 is the intercept.
  std::optional<Vector> true_beta;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }

  void validate() const {
    if (y.size() < 2) throw DomainError("dataset needs at least 2 rows");
    if (x.cols() < 1) throw DomainError("dataset needs at least 1 predictor");
    if (x.rows() != y.size()) throw DomainError("response length differs from predictor rows");
    if (!y.allFinite() || !x.allFinite()) throw DomainError("dataset contains non-finite values");
    if (true_beta && true_beta->size() != x.cols() + 1)
      throw DomainError("true_beta must have p+1 entries");
  }

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto r = rows[k];
      out.y(static_cast<Eigen::Index>(k)) = y(r);
      out.x.row(static_cast<Eigen::Index>(k)) = x.row(r);
    }
    out.true_beta = true_beta;
    return out;
  }
};

/// theta = (beta0, beta, sigma2).
struct ModelParams {
  double beta0 = 0.0;
  Vector beta;
  double sigma2 = 1.0;

  static ModelParams zeros(Eigen::Index p, double sigma2 = 1.0) {
    return ModelParams{0.0, Vector::Zero(p), sigma2};
  }

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("sigma2 must be positive and finite");
    if (!std::isfinite(beta0) || !beta.allFinite()) throw DomainError("coefficients must be finite");
  }

  std::vector<Eigen::Index> active_set() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      if (beta(j) != 0.0) out.push_back(j);
    return out;
  }

  double l1_norm() const { return beta.cwiseAbs().sum(); }
};

/// Raised when a fit collapses (variance floor, all density weights underflow).
class DegenerateFitError : public std::runtime_error {
 public:
  explicit DegenerateFitError(const std::string& what, std::optional<ModelParams> last = std::nullopt)
      : std::runtime_error(what), last_valid_(std::move(last)) {}
  const std::optional<ModelParams>& last_valid() const { return last_valid_; }

 private:
  std::optional<ModelParams> last_valid_;
};

struct GammaConfig {
  double gamma = 0.1;
  double lambda = 0.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 2.0)) throw ConfigError("gamma must lie in (0, 2]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  }
};

struct MmWeights {
  Vector alpha;
};

inline void check_sigma2(double sigma2) {
  if (!std::isfinite(sigma2)) throw DomainError("sigma2 must be finite");
  if (!(sigma2 >= kSigma2ValidityFloor))
    throw DegenerateFitError("sigma2 below validity floor");
}

inline double gaussian_log_density(double y, double mu, double sigma2) {
  if (!std::isfinite(y) || !std::isfinite(mu) || !std::isfinite(sigma2))
    throw DomainError("gaussian_log_density: non-finite input");
  if (!(sigma2 > 0.0)) throw DomainError("gaussian_log_density: sigma2 must be positive");
  const double r = y - mu;
  return -0.5 * (kLog2Pi + std::log(sigma2)) - r * r / (2.0 * sigma2);
}

/// log of  int phi(y; mu, sigma2)^(1+gamma) dy = (2 pi sigma2)^(-gamma/2) (1+gamma)^(-1/2).
inline double log_power_integral(double sigma2, double gamma) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("power_integral: sigma2 must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("power_integral: gamma must be >= 0");
  return -0.5 * gamma * (kLog2Pi + std::log(sigma2)) - 0.5 * std::log1p(gamma);
}

inline double power_integral(double sigma2, double gamma) {
  return std::exp(log_power_integral(sigma2, gamma));
}

/// Residuals y - beta0 - x beta.
inline Vector residuals(const Dataset& data, const ModelParams& params) {
  return (data.y - data.x * params.beta).array() - params.beta0;
}

namespace detail {

inline void check_shapes(const Dataset& data, const ModelParams& params) {
  if (params.beta.size() != data.p()) throw DomainError("coefficient length differs from predictor count");
  if (data.x.rows() != data.y.size()) throw DomainError("response length differs from predictor rows");
}

// gamma * log f(y_i | x_i; theta) for each row.
inline std::vector<double> scaled_log_densities(const Vector& resid, double sigma2, double gamma) {
  std::vector<double> t(static_cast<std::size_t>(resid.size()));
  const double log_norm = -0.5 * (kLog2Pi + std::log(sigma2));
  for (Eigen::Index i = 0; i < resid.size(); ++i) {
    const double r = resid(i);
    t[static_cast<std::size_t>(i)] = gamma * (log_norm - r * r / (2.0 * sigma2));
  }
  return t;
}

}  // namespace detail

/// -(1/g) log mean f^g + 1/(1+g) log mean int f^(1+g), from residuals.
inline double gamma_cross_entropy_from_residuals(const Vector& resid, double sigma2, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
  check_sigma2(sigma2);
  const auto t = detail::scaled_log_densities(resid, sigma2, gamma);
  const double lse = log_sum_exp(t);
  if (!std::isfinite(lse)) throw DegenerateFitError("all density weights underflow");
  const double log_mean = lse - std::log(static_cast<double>(resid.size()));
  return -log_mean / gamma + log_power_integral(sigma2, gamma) / (1.0 + gamma);
}

inline double empirical_gamma_cross_entropy(const Dataset& data, const ModelParams& params, double gamma) {
  detail::check_shapes(data, params);
  return gamma_cross_entropy_from_residuals(residuals(data, params), params.sigma2, gamma);
}

/// L_gamma(theta; lambda): cross entropy + lambda ||beta||_1.
inline double penalized_loss(const Dataset& data, const ModelParams& params, const GammaConfig& cfg) {
  cfg.validate();
  const double pen = cfg.lambda == 0.0 ? 0.0 : cfg.lambda * params.l1_norm();
  return empirical_gamma_cross_entropy(data, params, cfg.gamma) + pen;
}

/// Normalized density powers alpha_i proportional to exp(-gamma r_i^2 / (2 sigma2)).
inline MmWeights mm_weights_from_residuals(const Vector& resid, double sigma2, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
  check_sigma2(sigma2);
  const Eigen::Index n = resid.size();
  std::vector<double> t(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = -gamma * resid(i) * resid(i) / (2.0 * sigma2);
  const double lse = log_sum_exp(t);
  if (!std::isfinite(lse)) throw DegenerateFitError("all density weights underflow");
  MmWeights w;
  w.alpha.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) w.alpha(i) = std::exp(t[static_cast<std::size_t>(i)] - lse);
  return w;
}

inline MmWeights mm_weights(const Dataset& data, const ModelParams& params, double gamma) {
  detail::check_shapes(data, params);
  return mm_weights_from_residuals(residuals(data, params), params.sigma2, gamma);
}

/// h_MM(theta | anchor) with the parameter-free constant dropped.
inline double majorizer_value(const ModelParams& params, const ModelParams& anchor, const Dataset& data,
                              const GammaConfig& cfg) {
  cfg.validate();
  check_sigma2(anchor.sigma2);
  check_sigma2(params.sigma2);
  const MmWeights w = mm_weights(data, anchor, cfg.gamma);
  const Vector r = residuals(data, params);
  CompensatedSum wss;
  for (Eigen::Index i = 0; i < r.size(); ++i) wss.add(w.alpha(i) * r(i) * r(i));
  return std::log(params.sigma2) / (2.0 * (1.0 + cfg.gamma)) + 0.5 * wss.value() / params.sigma2 +
         cfg.lambda * params.l1_norm();
}

}  // namespace gammareg
