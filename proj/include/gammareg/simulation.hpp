#pragma once

// Seeded generators for the contaminated sparse-regression designs and the
// replicated experiment runner that scores methods on clean test data.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gammareg/baselines.hpp"
#include "gammareg/initializers.hpp"
#include "gammareg/metrics.hpp"
#include "gammareg/model_core.hpp"
#include "gammareg/parallel.hpp"
#include "gammareg/random.hpp"
#include "gammareg/selection.hpp"
#include "gammareg/solver.hpp"
#include "gammareg/trimmed_start.hpp"

namespace gammareg {

enum class OutlierPattern { none, a, b };

inline std::string to_string(OutlierPattern p) {
  switch (p) {
    case OutlierPattern::a:
      return "a";
    case OutlierPattern::b:
      return "b";
    default:
      return "none";
  }
}

inline OutlierPattern parse_pattern(const std::string& s) {
  if (s == "a") return OutlierPattern::a;
  if (s == "b") return OutlierPattern::b;
  if (s == "none") return OutlierPattern::none;
  throw ConfigError("unknown outlier pattern '" + s + "' (expected a, b or none)");
}

struct SimulationSpec {
  Eigen::Index n = 100;
  Eigen::Index p = 100;
  double rho = 0.2;
  double epsilon = 0.1;
  OutlierPattern pattern = OutlierPattern::a;
  double noise_sd = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || p < 1) throw ConfigError("simulation: n and p must be >= 1");
    if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("simulation: rho must lie in (-1, 1)");
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("simulation: epsilon must lie in [0, 0.5)");
    if (!(noise_sd > 0.0)) throw ConfigError("simulation: noise_sd must be positive");
  }
};

struct SimulatedData {
  Dataset train;
  Dataset test;
  /// Train rows that carry contamination, ascending.
  std::vector<Eigen::Index> contaminated_rows;
};

/// beta_1 = 1, beta_2 = 2, beta_4 = 4, beta_7 = 7, beta_11 = 11, others 0
/// (index 0 is the intercept).
inline Vector true_coefficients(Eigen::Index p) {
  Vector beta = Vector::Zero(p + 1);
  for (Eigen::Index j : {1, 2, 4, 7, 11})
    if (j <= p) beta(j) = static_cast<double>(j);
  return beta;
}

namespace detail {

// x ~ N(0, Sigma), Sigma_ij = rho^|i-j|, via the AR(1) recursion.
template <typename Row>
void fill_ar1_row(Rng& rng, double rho, Row&& row) {
  const double innov = std::sqrt(1.0 - rho * rho);
  row(0) = rng.normal();
  for (Eigen::Index j = 1; j < row.size(); ++j) row(j) = rho * row(j - 1) + innov * rng.normal();
}

inline Dataset clean_rows(Rng& rng, const SimulationSpec& spec, const Vector& beta, Eigen::Index rows) {
  Dataset d;
  d.x.resize(rows, spec.p);
  d.y.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    fill_ar1_row(rng, spec.rho, d.x.row(i));
    d.y(i) = beta(0) + d.x.row(i).dot(beta.tail(spec.p)) + rng.normal(0.0, spec.noise_sd);
  }
  d.true_beta = beta;
  return d;
}

}  // namespace detail

/// Training rows: the first floor(epsilon n) are contaminated, then all rows
/// are shuffled. Outlier covariates are i.i.d. N(0, 0.5^2) (pattern a) or
/// N(-1.5, 0.5^2) (pattern b); outlier errors are N(20, 0.5^2). The test set
/// is n clean rows.
inline SimulatedData generate(const SimulationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Vector beta = true_coefficients(spec.p);
  const Eigen::Index n_out =
      spec.pattern == OutlierPattern::none ? 0 : static_cast<Eigen::Index>(std::floor(spec.epsilon * static_cast<double>(spec.n)));

  Matrix x(spec.n, spec.p);
  Vector y(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    if (i < n_out) {
      const double center = spec.pattern == OutlierPattern::a ? 0.0 : -1.5;
      for (Eigen::Index j = 0; j < spec.p; ++j) x(i, j) = rng.normal(center, 0.5);
      y(i) = beta(0) + x.row(i).dot(beta.tail(spec.p)) + rng.normal(20.0, 0.5);
    } else {
      detail::fill_ar1_row(rng, spec.rho, x.row(i));
      y(i) = beta(0) + x.row(i).dot(beta.tail(spec.p)) + rng.normal(0.0, spec.noise_sd);
    }
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(spec.n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  rng.shuffle(perm);

  SimulatedData out;
  out.train.x.resize(spec.n, spec.p);
  out.train.y.resize(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const Eigen::Index src = perm[static_cast<std::size_t>(i)];
    out.train.x.row(i) = x.row(src);
    out.train.y(i) = y(src);
    if (src < n_out) out.contaminated_rows.push_back(i);
  }
  out.train.true_beta = beta;
  out.test = detail::clean_rows(rng, spec, beta, spec.n);
  return out;
}

// ---------------------------------------------------------------------------
// Replicated experiments

enum class MethodKind { gamma, lasso };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::gamma;
  double gamma = 0.1;
  CvConfig cv;
  InitKind init = InitKind::trimmed;
  int ransac_trials = 200;
};

inline MethodSpec gamma_method(double gamma, const CvConfig& cv = {}) {
  MethodSpec m;
  m.kind = MethodKind::gamma;
  m.gamma = gamma;
  m.cv = cv;
  char buf[64];
  std::snprintf(buf, sizeof buf, "gamma(%g)", gamma);
  m.name = buf;
  return m;
}

inline MethodSpec lasso_method(const CvConfig& cv = {}) {
  MethodSpec m;
  m.kind = MethodKind::lasso;
  m.name = "lasso";
  m.cv = cv;
  return m;
}

struct ReplicationScore {
  bool ok = false;
  std::string error;
  double rmspe = 0.0;
  double mse = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double lambda = 0.0;
};

struct MethodSummary {
  std::string name;
  double rmspe = 0.0;
  double mse = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  int successes = 0;
  int failures = 0;
  std::vector<ReplicationScore> replications;
};

struct ExperimentTable {
  SimulationSpec spec;
  int replications = 0;
  std::vector<MethodSummary> methods;
};

/// Fits one method on a training set and returns its chosen parameters.
inline ModelParams fit_method(const MethodSpec& m, const Dataset& train, std::uint64_t seed, double* chosen_lambda) {
  CvConfig cv = m.cv;
  cv.seed = seed;
  if (m.kind == MethodKind::lasso) {
    const CvReport rep = lasso_cv(train, cv);
    if (chosen_lambda) *chosen_lambda = rep.best_lambda;
    return rep.final_fit.params;
  }
  const Initialization init = make_start(m.init, train, splitmix64(seed ^ 0x5EED), m.ransac_trials);
  const CvReport rep = cross_validate(train, m.gamma, cv, init.params);
  if (chosen_lambda) *chosen_lambda = rep.best_lambda;
  return rep.final_fit.params;
}

inline ReplicationScore score_fit(const SimulatedData& sim, const ModelParams& params) {
  ReplicationScore s;
  const Vector& truth = *sim.train.true_beta;
  const Vector est = stacked_coefficients(params);
  s.rmspe = rmspe(sim.test, params);
  s.mse = mse_coefficients(truth, est);
  const auto rates = tpr_tnr(truth.tail(truth.size() - 1), est.tail(est.size() - 1));
  s.tpr = rates.tpr;
  s.tnr = rates.tnr;
  s.ok = true;
  return s;
}

/// Replication r uses the substream (seed, r) for data and fold assignment,
/// so serial and parallel runs agree.
inline ExperimentTable run_experiment(const SimulationSpec& spec, const std::vector<MethodSpec>& methods,
                                      int replications, std::uint64_t seed) {
  spec.validate();
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (methods.empty()) throw ConfigError("at least one method is required");

  std::vector<std::vector<ReplicationScore>> scores(static_cast<std::size_t>(replications),
                                                    std::vector<ReplicationScore>(methods.size()));
  parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
    SimulationSpec rs = spec;
    rs.seed = Rng::substream(seed, r).next_u64();
    const SimulatedData sim = generate(rs);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      ReplicationScore& out = scores[r][mi];
      try {
        double lam = 0.0;
        const ModelParams params = fit_method(methods[mi], sim.train, rs.seed, &lam);
        out = score_fit(sim, params);
        out.lambda = lam;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
    }
  });

  ExperimentTable table;
  table.spec = spec;
  table.replications = replications;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodSummary sum;
    sum.name = methods[mi].name;
    CompensatedSum a, b, c, d;
    for (int r = 0; r < replications; ++r) {
      const ReplicationScore& s = scores[static_cast<std::size_t>(r)][mi];
      sum.replications.push_back(s);
      if (!s.ok) {
        ++sum.failures;
        continue;
      }
      ++sum.successes;
      a.add(s.rmspe);
      b.add(s.mse);
      c.add(s.tpr);
      d.add(s.tnr);
    }
    if (sum.successes > 0) {
      const double k = static_cast<double>(sum.successes);
      sum.rmspe = a.value() / k;
      sum.mse = b.value() / k;
      sum.tpr = c.value() / k;
      sum.tnr = d.value() / k;
    } else {
      sum.rmspe = sum.mse = sum.tpr = sum.tnr = std::numeric_limits<double>::quiet_NaN();
    }
    table.methods.push_back(std::move(sum));
  }
  return table;
}

}  // namespace gammareg
