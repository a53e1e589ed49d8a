#pragma once

// Quadrature checks of the gamma-divergence theory on one-dimensional Gaussian
// conditional models: divergence properties, the approximate Pythagorean
// relation under contamination, and the redescending estimating function.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gammareg/model_core.hpp"
#include "gammareg/numeric.hpp"
#include "gammareg/random.hpp"
#include "gammareg/solver.hpp"

namespace gammareg::lab {

/// One point of the discrete covariate distribution.
struct XAtom {
  Vector x;
  double prob = 1.0;
};

struct GaussComponent {
  double weight = 1.0;
  double mean = 0.0;
  double var = 1.0;
};

/// Conditional density of y at a fixed x, as a finite Gaussian mixture.
using Mixture = std::vector<GaussComponent>;
using CondDensity = std::function<Mixture(const Vector& x)>;

struct ContaminationModel {
  /// Defines the target f(y|x; theta*).
  ModelParams target;
  /// Outlier center y_dagger(x).
  std::function<double(const Vector&)> delta_location;
  /// Contamination width relative to the target sd.
  double delta_sd_ratio = 0.01;
  std::function<double(const Vector&)> epsilon = [](const Vector&) { return 0.0; };
  std::vector<XAtom> atoms;

  double delta_sd() const { return delta_sd_ratio * std::sqrt(target.sigma2); }

  void validate() const {
    target.validate();
    if (!delta_location) throw ConfigError("contamination model: delta_location is required");
    if (!(delta_sd_ratio > 0.0)) throw ConfigError("contamination model: delta_sd_ratio must be positive");
    if (atoms.empty()) throw ConfigError("contamination model: at least one x atom is required");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.x.size() != target.beta.size()) throw ConfigError("contamination model: atom dimension mismatch");
      if (!(a.prob >= 0.0)) throw ConfigError("contamination model: atom probabilities must be >= 0");
      const double e = epsilon(a.x);
      if (!(e >= 0.0 && e < 0.5)) throw ConfigError("contamination model: epsilon must lie in [0, 0.5)");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("contamination model: atom probabilities must sum to 1");
  }
};

inline ContaminationModel with_constant_epsilon(ContaminationModel m, double eps) {
  m.epsilon = [eps](const Vector&) { return eps; };
  return m;
}

inline double mean_at(const ModelParams& p, const Vector& x) { return p.beta0 + x.dot(p.beta); }

inline CondDensity model_density(const ModelParams& p) {
  return [p](const Vector& x) { return Mixture{{1.0, mean_at(p, x), p.sigma2}}; };
}

/// g(y|x) = (1 - eps(x)) f(y|x; theta*) + eps(x) delta(y|x).
inline CondDensity contaminated_density(const ContaminationModel& m) {
  return [m](const Vector& x) {
    const double e = m.epsilon(x);
    Mixture out{{1.0 - e, mean_at(m.target, x), m.target.sigma2}};
    if (e > 0.0) out.push_back({e, m.delta_location(x), m.delta_sd() * m.delta_sd()});
    return out;
  };
}

inline CondDensity delta_density(const ContaminationModel& m) {
  return [m](const Vector& x) { return Mixture{{1.0, m.delta_location(x), m.delta_sd() * m.delta_sd()}}; };
}

inline double log_mixture(const Mixture& mix, double y) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : mix)
    if (c.weight > 0.0) hi = std::max(hi, std::log(c.weight) + gaussian_log_density(y, c.mean, c.var));
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (const auto& c : mix)
    if (c.weight > 0.0) acc += std::exp(std::log(c.weight) + gaussian_log_density(y, c.mean, c.var) - hi);
  return hi + std::log(acc);
}

struct QuadratureConfig {
  /// Relative tolerance per segment.
  double rel_tol = 1e-12;
  unsigned max_depth = 20;
  /// Absolute tolerance per segment; caps the work spent on tiny segments.
  double abs_tol = 1e-13;
  /// Segment edges at center +- k sd for every mixture component.
  std::vector<double> sd_breaks{0.0, 1.0, 3.0, 6.0, 10.0, 20.0, 40.0};
};

/// Integral over the real line of exp(log_integrand(y)). The integrand must
/// be negligible beyond 40 sd of every listed component.
inline double integrate_line(const std::function<double(double)>& log_integrand, const std::vector<GaussComponent>& comps,
                             const QuadratureConfig& q = {}) {
  std::vector<double> edges;
  for (const auto& c : comps) {
    const double sd = std::sqrt(c.var);
    for (double k : q.sd_breaks) {
      edges.push_back(c.mean - k * sd);
      edges.push_back(c.mean + k * sd);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  auto f = [&](double y) { return std::exp(log_integrand(y)); };
  using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
  std::vector<double> parts(edges.size() > 1 ? edges.size() - 1 : 0);
  for (std::size_t k = 0; k < parts.size(); ++k) parts[k] = gk::integrate(f, edges[k], edges[k + 1], 0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (!(std::abs(parts[k]) > q.abs_tol)) continue;
    const double tol = std::max(q.rel_tol, q.abs_tol / std::abs(parts[k]));
    double err = 0.0;
    parts[k] = gk::integrate(f, edges[k], edges[k + 1], q.max_depth, tol, &err);
  }
  return compensated_sum(parts);
}

namespace detail {

inline std::vector<GaussComponent> joined(const Mixture& a, const Mixture& b) {
  std::vector<GaussComponent> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace detail

/// int h(y|x) f(y|x)^gamma dy at one x.
inline double cross_power_integral(const Mixture& h, const Mixture& f, double gamma, const QuadratureConfig& q = {}) {
  return integrate_line([&](double y) { return log_mixture(h, y) + gamma * log_mixture(f, y); }, detail::joined(h, f), q);
}

/// int f(y|x)^(1+gamma) dy at one x.
inline double self_power_integral(const Mixture& f, double gamma, const QuadratureConfig& q = {}) {
  return integrate_line([&](double y) { return (1.0 + gamma) * log_mixture(f, y); }, f, q);
}

/// d_gamma(h, f; w) for an arbitrary (possibly unnormalized) atom measure w.
inline double cross_entropy(const CondDensity& h, const CondDensity& f, double gamma, const std::vector<XAtom>& measure,
                            const QuadratureConfig& q = {}) {
  if (!(gamma > 0.0)) throw DomainError("cross_entropy: gamma must be positive");
  CompensatedSum a, b;
  for (const auto& atom : measure) {
    if (atom.prob == 0.0) continue;
    const Mixture hm = h(atom.x);
    const Mixture fm = f(atom.x);
    a.add(atom.prob * cross_power_integral(hm, fm, gamma, q));
    b.add(atom.prob * self_power_integral(fm, gamma, q));
  }
  return -std::log(a.value()) / gamma + std::log(b.value()) / (1.0 + gamma);
}

inline double divergence(const CondDensity& h, const CondDensity& f, double gamma, const std::vector<XAtom>& measure,
                         const QuadratureConfig& q = {}) {
  return -cross_entropy(h, h, gamma, measure, q) + cross_entropy(h, f, gamma, measure, q);
}

/// d_gamma(g, f_theta; g(x)) with g the contaminated conditional density.
inline double gamma_cross_entropy_quadrature(const ContaminationModel& g, const ModelParams& f, double gamma,
                                             const QuadratureConfig& q = {}) {
  g.validate();
  return cross_entropy(contaminated_density(g), model_density(f), gamma, g.atoms, q);
}

/// D_gamma(g, f_theta; g(x)).
inline double gamma_divergence(const ContaminationModel& g, const ModelParams& f, double gamma,
                               const QuadratureConfig& q = {}) {
  g.validate();
  return divergence(contaminated_density(g), model_density(f), gamma, g.atoms, q);
}

/// x-averaged Kullback-Leibler divergence of f_theta from g.
inline double kl_divergence(const ContaminationModel& g, const ModelParams& f, const QuadratureConfig& q = {}) {
  g.validate();
  const CondDensity gd = contaminated_density(g);
  CompensatedSum acc;
  for (const auto& atom : g.atoms) {
    const Mixture gm = gd(atom.x);
    const double mu = mean_at(f, atom.x);
    const auto comps = detail::joined(gm, Mixture{{1.0, mu, f.sigma2}});
    // Split g log(g/f) into its positive and negative parts so both integrands are exp(.)-form.
    const auto log_g = [&](double y) { return log_mixture(gm, y); };
    const double plus = integrate_line(
        [&](double y) {
          const double lg = log_g(y);
          const double d = lg - gaussian_log_density(y, mu, f.sigma2);
          return d > 0.0 ? lg + std::log(d) : -std::numeric_limits<double>::infinity();
        },
        comps, q);
    const double minus = integrate_line(
        [&](double y) {
          const double lg = log_g(y);
          const double d = lg - gaussian_log_density(y, mu, f.sigma2);
          return d < 0.0 ? lg + std::log(-d) : -std::numeric_limits<double>::infinity();
        },
        comps, q);
    acc.add(atom.prob * (plus - minus));
  }
  return acc.value();
}

/// nu_{f,gamma}^gamma = sum_x w(x) int delta(y|x) f(y|x)^gamma dy.
inline double nu_power(const ContaminationModel& m, const ModelParams& f, double gamma, const QuadratureConfig& q = {}) {
  const CondDensity d = delta_density(m);
  const CondDensity fd = model_density(f);
  CompensatedSum acc;
  for (const auto& atom : m.atoms) acc.add(atom.prob * cross_power_integral(d(atom.x), fd(atom.x), gamma, q));
  return acc.value();
}

/// Pieces of the Pythagorean residual for one candidate theta:
/// S = sum w (1 - eps) int f* f^gamma, E = sum w eps int delta f^gamma.
struct OverlapTerms {
  double signal = 0.0;
  double contamination = 0.0;
};

inline OverlapTerms overlap_terms(const ContaminationModel& m, const ModelParams& f, double gamma,
                                  const QuadratureConfig& q = {}) {
  const CondDensity target = model_density(m.target);
  const CondDensity d = delta_density(m);
  const CondDensity fd = model_density(f);
  CompensatedSum s, e;
  for (const auto& atom : m.atoms) {
    const double eps = m.epsilon(atom.x);
    const Mixture fm = fd(atom.x);
    s.add(atom.prob * (1.0 - eps) * cross_power_integral(target(atom.x), fm, gamma, q));
    if (eps > 0.0) e.add(atom.prob * eps * cross_power_integral(d(atom.x), fm, gamma, q));
  }
  return OverlapTerms{s.value(), e.value()};
}

struct PythagoreanResult {
  /// D(g, f_theta) - D(g, f*) - D(f*, f_theta; base).
  double residual = 0.0;
  /// nu^gamma with nu = max(nu_theta, nu_theta*).
  double nu_gamma = 0.0;
  /// Analytic ceiling 2 eps_max nu^gamma / (gamma min S) on |residual|.
  double bound = 0.0;
};

namespace detail {

// With a homoscedastic Gaussian model int f^(1+gamma) dy does not depend on x,
// so the variance terms cancel between theta and theta* and
// residual = -(1/gamma) [log1p(E_theta / S_theta) - log1p(E* / S*)].
inline PythagoreanResult pythagorean(const ContaminationModel& m, const ModelParams& theta, double gamma,
                                     const QuadratureConfig& q) {
  m.validate();
  if (!(gamma > 0.0)) throw DomainError("pythagorean residual: gamma must be positive");
  const OverlapTerms a = overlap_terms(m, theta, gamma, q);
  const OverlapTerms b = overlap_terms(m, m.target, gamma, q);
  PythagoreanResult out;
  out.residual = -(std::log1p(a.contamination / a.signal) - std::log1p(b.contamination / b.signal)) / gamma;
  out.nu_gamma = std::max(nu_power(m, theta, gamma, q), nu_power(m, m.target, gamma, q));
  double eps_max = 0.0;
  for (const auto& atom : m.atoms) eps_max = std::max(eps_max, m.epsilon(atom.x));
  out.bound = 2.0 * eps_max * out.nu_gamma / (gamma * std::min(a.signal, b.signal));
  return out;
}

}  // namespace detail

/// Residual of the approximate Pythagorean relation under constant epsilon.
inline PythagoreanResult pythagorean_residual_homogeneous(const ContaminationModel& m, const ModelParams& theta,
                                                          double gamma, const QuadratureConfig& q = {}) {
  for (const auto& atom : m.atoms)
    if (m.epsilon(atom.x) != m.epsilon(m.atoms.front().x))
      throw ConfigError("homogeneous residual needs a constant epsilon");
  return detail::pythagorean(m, theta, gamma, q);
}

/// Residual with the third divergence taken under the base measure (1 - eps(x)) g(x).
inline PythagoreanResult pythagorean_residual_heterogeneous(const ContaminationModel& m, const ModelParams& theta,
                                                            double gamma, const QuadratureConfig& q = {}) {
  return detail::pythagorean(m, theta, gamma, q);
}

/// The same residual evaluated term by term from four cross entropies. Only
/// accurate while the residual is well above rounding in the individual terms.
inline double pythagorean_residual_direct(const ContaminationModel& m, const ModelParams& theta, double gamma,
                                          const QuadratureConfig& q = {}) {
  m.validate();
  const CondDensity g = contaminated_density(m);
  const CondDensity fs = model_density(m.target);
  const CondDensity ft = model_density(theta);
  std::vector<XAtom> base = m.atoms;
  for (auto& a : base) a.prob *= 1.0 - m.epsilon(a.x);
  const double d1 = divergence(g, ft, gamma, m.atoms, q);
  const double d2 = divergence(g, fs, gamma, m.atoms, q);
  const double d3 = divergence(fs, ft, gamma, base, q);
  return d1 - d2 - d3;
}

// ---------------------------------------------------------------------------
// Estimating function

/// psi(y|x; theta) = phi^gamma s - phi^gamma db/dtheta over (beta0, beta, sigma2),
/// with the penalty subgradient taken at sign(beta_j) (0 at beta_j = 0).
inline Vector psi_function(double y, const Vector& x, const ModelParams& params, const GammaConfig& cfg) {
  cfg.validate();
  check_sigma2(params.sigma2);
  if (x.size() != params.beta.size()) throw DomainError("psi_function: dimension mismatch");
  const Eigen::Index p = x.size();
  const double s2 = params.sigma2;
  const double r = y - mean_at(params, x);
  const double w = std::exp(cfg.gamma * gaussian_log_density(y, mean_at(params, x), s2));
  Vector out(p + 2);
  out(0) = w * r / s2;
  for (Eigen::Index j = 0; j < p; ++j) out(j + 1) = w * (x(j) * r / s2 - cfg.lambda * sign(params.beta(j)));
  const double db_ds2 = -cfg.gamma / (2.0 * (1.0 + cfg.gamma) * s2);
  out(p + 1) = w * ((r * r / s2 - 1.0) / (2.0 * s2) - db_ds2);
  return out;
}

inline Vector psi_sum(const Dataset& data, const ModelParams& params, const GammaConfig& cfg) {
  Vector acc = Vector::Zero(data.p() + 2);
  for (Eigen::Index i = 0; i < data.n(); ++i) acc += psi_function(data.y(i), data.x.row(i).transpose(), params, cfg);
  return acc;
}

/// Gradient of penalized_loss implied by psi: -sum psi / sum phi^gamma.
inline Vector loss_gradient_from_psi(const Dataset& data, const ModelParams& params, const GammaConfig& cfg) {
  CompensatedSum norm;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    norm.add(std::exp(cfg.gamma * gaussian_log_density(data.y(i), mean_at(params, data.x.row(i).transpose()), params.sigma2)));
  return -psi_sum(data, params, cfg) / norm.value();
}

// ---------------------------------------------------------------------------
// Suites

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  void add(std::string name, double value, double limit, bool pass) {
    checks.push_back(Check{std::move(name), value, limit, pass});
  }
};

struct SuiteConfig {
  std::vector<double> gammas{0.1, 0.5};
  std::vector<double> epsilons{0.1, 0.3};
  /// Multiplies every tolerance; must be positive.
  double tolerance_scale = 1.0;
  int random_models = 12;
  std::uint64_t seed = 20240601;

  void validate() const {
    if (!(tolerance_scale > 0.0) || !std::isfinite(tolerance_scale))
      throw ConfigError("tolerance scale must be positive and finite");
    if (gammas.empty() || epsilons.empty()) throw ConfigError("suite needs at least one gamma and one epsilon");
    for (double g : gammas)
      if (!(g > 0.0)) throw ConfigError("suite gammas must be positive");
    for (double e : epsilons)
      if (!(e >= 0.0 && e < 0.5)) throw ConfigError("suite epsilons must lie in [0, 0.5)");
    if (random_models < 1) throw ConfigError("random_models must be >= 1");
  }
};

inline std::vector<XAtom> default_atoms() {
  std::vector<XAtom> atoms;
  const double xs[] = {-1.5, -0.5, 0.0, 0.7, 1.8};
  const double ps[] = {0.15, 0.25, 0.2, 0.25, 0.15};
  for (int k = 0; k < 5; ++k) atoms.push_back(XAtom{Vector::Constant(1, xs[k]), ps[k]});
  return atoms;
}

/// Target y = 0.5 + 1.2 x + N(0, 1) with outliers at mu*(x) + offset sd.
inline ContaminationModel shifted_outlier_model(double offset_sd, double eps) {
  ContaminationModel m;
  m.target = ModelParams{0.5, Vector::Constant(1, 1.2), 1.0};
  const ModelParams t = m.target;
  m.delta_location = [t, offset_sd](const Vector& x) { return mean_at(t, x) + offset_sd * std::sqrt(t.sigma2); };
  m.atoms = default_atoms();
  return with_constant_epsilon(m, eps);
}

/// eps(x) between 0.4 eps and eps, varying with |x|.
inline ContaminationModel heterogeneous(ContaminationModel m, double eps) {
  m.epsilon = [eps](const Vector& x) { return eps * (0.4 + 0.6 * std::min(1.0, std::abs(x(0)) / 1.8)); };
  return m;
}

inline ModelParams perturbed_candidate(const ModelParams& t) {
  return ModelParams{t.beta0 + 0.3, t.beta * 0.85, t.sigma2 * 1.2};
}

/// Non-negativity, identity, and KL limit over seeded random (g, f) pairs.
inline SuiteReport divergence_suite(const SuiteConfig& cfg = {}) {
  cfg.validate();
  SuiteReport rep{"divergence", {}};
  const double ts = cfg.tolerance_scale;
  Rng rng(cfg.seed);
  char buf[160];
  double worst_neg = std::numeric_limits<double>::infinity();
  double worst_id = 0.0;
  double worst_kl = 0.0;
  for (int k = 0; k < cfg.random_models; ++k) {
    ContaminationModel m;
    m.target = ModelParams{rng.normal(0.0, 1.0), Vector::Constant(1, rng.normal(0.0, 1.0)), 0.3 + 2.0 * rng.uniform()};
    const double off = (1.5 + 3.5 * rng.uniform()) * std::sqrt(m.target.sigma2);
    const ModelParams t = m.target;
    m.delta_location = [t, off](const Vector& x) { return mean_at(t, x) + off; };
    m.delta_sd_ratio = 0.05 + 0.5 * rng.uniform();
    m.atoms = default_atoms();
    m = with_constant_epsilon(m, 0.3 * rng.uniform());
    const ModelParams f{t.beta0 + rng.normal(0.0, 0.5), t.beta * (0.5 + rng.uniform()), t.sigma2 * (0.5 + rng.uniform())};
    for (double g : cfg.gammas) worst_neg = std::min(worst_neg, gamma_divergence(m, f, g));

    const ContaminationModel clean = with_constant_epsilon(m, 0.0);
    for (double g : cfg.gammas) worst_id = std::max(worst_id, std::abs(gamma_divergence(clean, clean.target, g)));
    worst_kl = std::max(worst_kl, std::abs(gamma_divergence(m, f, 1e-4) - kl_divergence(m, f)));
  }
  std::snprintf(buf, sizeof buf, "non-negativity: min D over %d models", cfg.random_models);
  rep.add(buf, worst_neg, -1e-10 * ts, worst_neg >= -1e-10 * ts);
  rep.add("identity: max |D(f, f)|", worst_id, 1e-8 * ts, worst_id <= 1e-8 * ts);
  rep.add("KL limit at gamma=1e-4: max |D - KL|", worst_kl, 1e-3 * ts, worst_kl <= 1e-3 * ts);
  return rep;
}

/// Residual decay as the outlier center moves from 10 to 40 target sd.
inline SuiteReport pythagorean_suite(const SuiteConfig& cfg = {}) {
  cfg.validate();
  SuiteReport rep{"pythagorean", {}};
  const double ts = cfg.tolerance_scale;
  const std::vector<double> offsets{10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0};
  char buf[200];
  for (double g : cfg.gammas) {
    for (double e : cfg.epsilons) {
      for (int hetero = 0; hetero < 2; ++hetero) {
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        double last = 0.0;
        double worst_ratio = 0.0;
        for (double off : offsets) {
          ContaminationModel m = shifted_outlier_model(off, e);
          if (hetero) m = heterogeneous(m, e);
          const ModelParams theta = perturbed_candidate(m.target);
          const PythagoreanResult r = hetero ? pythagorean_residual_heterogeneous(m, theta, g)
                                             : pythagorean_residual_homogeneous(m, theta, g);
          const double mag = std::abs(r.residual);
          if (!(mag < prev) && mag > 0.0) monotone = false;
          prev = mag;
          last = mag;
          if (r.bound > 0.0) worst_ratio = std::max(worst_ratio, mag / r.bound);
        }
        const char* kind = hetero ? "eps(x)" : "eps";
        std::snprintf(buf, sizeof buf, "gamma=%g %s=%g: residual decreasing over 10..40 sd", g, kind, e);
        rep.add(buf, monotone ? 1.0 : 0.0, 1.0, monotone);
        std::snprintf(buf, sizeof buf, "gamma=%g %s=%g: |residual| at 40 sd", g, kind, e);
        rep.add(buf, last, 1e-6 * ts, last < 1e-6 * ts);
        std::snprintf(buf, sizeof buf, "gamma=%g %s=%g: max |residual| / O(nu^gamma) bound", g, kind, e);
        rep.add(buf, worst_ratio, 1.0 * ts, worst_ratio <= 1.0 * ts);
      }
    }
  }
  return rep;
}

/// Tail annihilation of psi and the estimating equation at a fitted point.
inline SuiteReport redescending_suite(const SuiteConfig& cfg = {}) {
  cfg.validate();
  SuiteReport rep{"redescending", {}};
  const double ts = cfg.tolerance_scale;
  char buf[160];

  Rng rng(cfg.seed ^ 0xA5A5A5A5ULL);
  const Eigen::Index n = 200, p = 3;
  Dataset data;
  data.x.resize(n, p);
  data.y.resize(n);
  const Vector beta = (Vector(p) << 1.0, -0.5, 0.25).finished();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) data.x(i, j) = rng.normal();
    data.y(i) = 0.3 + data.x.row(i).dot(beta) + rng.normal(0.0, 0.7);
  }

  for (double g : cfg.gammas) {
    const GammaConfig gc{g, 0.0};
    const ModelParams probe{0.3, beta, 0.49};
    const Vector x0 = data.x.row(0).transpose();
    double worst = 0.0;
    for (double dir : {-1.0, 1.0})
      worst = std::max(worst, psi_function(mean_at(probe, x0) + dir * 100.0 * std::sqrt(probe.sigma2), x0, probe, gc).norm());
    std::snprintf(buf, sizeof buf, "gamma=%g: ||psi|| at |y - mu| = 100 sd", g);
    rep.add(buf, worst, 1e-50 * ts, worst < 1e-50 * ts);

    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    for (double radius : {10.0, 30.0, 100.0}) {
      double sup = 0.0;
      for (double dir : {-1.0, 1.0})
        for (double extra : {0.0, 0.5, 2.0})
          sup = std::max(sup, psi_function(mean_at(probe, x0) + dir * (radius + extra) * std::sqrt(probe.sigma2), x0, probe, gc).norm());
      if (!(sup < prev)) decreasing = false;
      prev = sup;
    }
    std::snprintf(buf, sizeof buf, "gamma=%g: sup ||psi|| beyond R decreasing for R in {10, 30, 100} sd", g);
    rep.add(buf, decreasing ? 1.0 : 0.0, 1.0, decreasing);

    FitConfig fc;
    fc.gamma = g;
    fc.lambda = 0.0;
    fc.tol_loss = 1e-14;
    fc.tol_param = 1e-13;
    fc.kkt_tol = 1e-9;
    fc.max_mm_iters = 5000;
    const ModelParams fitted = fit(data, fc, ModelParams{0.0, Vector::Zero(p), 1.0}).params;
    const double eq = psi_sum(data, fitted, gc).norm();
    std::snprintf(buf, sizeof buf, "gamma=%g: ||sum psi|| at lambda=0 fixed point", g);
    rep.add(buf, eq, 1e-5 * static_cast<double>(n) * ts, eq <= 1e-5 * static_cast<double>(n) * ts);

    // Finite differences at a point off the fixed point.
    ModelParams at = fitted;
    at.beta0 += 0.05;
    at.beta(1) += 0.07;
    at.sigma2 *= 1.1;
    const Vector grad = loss_gradient_from_psi(data, at, gc);
    double worst_fd = 0.0;
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < p + 2; ++k) {
      ModelParams up = at, dn = at;
      auto bump = [&](ModelParams& m, double d) {
        if (k == 0)
          m.beta0 += d;
        else if (k <= p)
          m.beta(k - 1) += d;
        else
          m.sigma2 += d;
      };
      bump(up, h);
      bump(dn, -h);
      const double fd = (penalized_loss(data, up, gc) - penalized_loss(data, dn, gc)) / (2.0 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - grad(k)));
    }
    std::snprintf(buf, sizeof buf, "gamma=%g: -sum psi / sum phi^gamma vs finite differences", g);
    rep.add(buf, worst_fd, 1e-6 * ts, worst_fd <= 1e-6 * ts);
  }
  return rep;
}

inline std::vector<SuiteReport> all_suites(const SuiteConfig& cfg = {}) {
  return {divergence_suite(cfg), pythagorean_suite(cfg), redescending_suite(cfg)};
}

}  // namespace gammareg::lab
