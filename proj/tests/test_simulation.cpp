#include <gtest/gtest.h>

#include <cmath>

#include "gammareg/simulation.hpp"
#include "support.hpp"

using namespace gammareg;

namespace {

SimulationSpec small_spec() {
  SimulationSpec s;
  s.n = 40;
  s.p = 12;
  s.epsilon = 0.1;
  s.seed = 3;
  return s;
}

std::vector<MethodSpec> fast_methods() {
  CvConfig cv;
  cv.folds = 3;
  cv.grid_size = 5;
  MethodSpec g = gamma_method(0.1, cv);
  g.init = InitKind::zero;
  return {g, lasso_method(cv)};
}

}  // namespace

TEST(TrueCoefficients, SupportAndSum) {
  const Vector b = true_coefficients(100);
  ASSERT_EQ(b.size(), 101);
  EXPECT_EQ(b(0), 0.0);
  int nz = 0;
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b(j) != 0.0) {
      ++nz;
      EXPECT_EQ(b(j), static_cast<double>(j));
    }
  EXPECT_EQ(nz, 5);
  EXPECT_EQ(b.cwiseAbs().sum(), 25.0);
  EXPECT_EQ(true_coefficients(11).tail(11), b.segment(1, 11));
}

namespace {

double covariance_error(Eigen::Index n, double rho, std::uint64_t seed, double* expected) {
  SimulationSpec s;
  s.n = n;
  s.p = 10;
  s.rho = rho;
  s.epsilon = 0.0;
  s.pattern = OutlierPattern::none;
  s.seed = seed;
  const Matrix& x = generate(s).train.x;
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Matrix target(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) target(i, j) = std::pow(rho, std::abs(i - j));
  // E||S - Sigma||_F^2 = (||Sigma||_F^2 + tr(Sigma)^2) / n for Gaussian rows
  *expected = std::sqrt((target.squaredNorm() + 100.0) / static_cast<double>(n));
  return (cov - target).norm();
}

}  // namespace

TEST(Generate, Ar1CovarianceMatchesToeplitz) {
  double expected = 0.0;
  EXPECT_LT(covariance_error(20000, 0.2, 11, &expected), 0.15);
  for (double rho : {0.2, 0.5}) {
    const double err = covariance_error(2000, rho, 12, &expected);
    EXPECT_LT(err, 1.5 * expected);
  }
}

TEST(Generate, TwoColumnCorrelationWithinThreeStandardErrors) {
  SimulationSpec s;
  s.n = 10000;
  s.p = 2;
  s.rho = 0.2;
  s.epsilon = 0.0;
  s.pattern = OutlierPattern::none;
  s.seed = 5;
  const SimulatedData sim = generate(s);
  const Vector a = sim.train.x.col(0).array() - sim.train.x.col(0).mean();
  const Vector b = sim.train.x.col(1).array() - sim.train.x.col(1).mean();
  const double corr = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  const double se = (1.0 - s.rho * s.rho) / std::sqrt(static_cast<double>(s.n));
  EXPECT_NEAR(corr, s.rho, 3.0 * se);
}

TEST(Generate, ContaminationCountIsExact) {
  SimulationSpec s;
  s.epsilon = 0.3;
  s.seed = 2;
  const SimulatedData sim = generate(s);
  EXPECT_EQ(sim.contaminated_rows.size(), 30u);
  EXPECT_TRUE(std::is_sorted(sim.contaminated_rows.begin(), sim.contaminated_rows.end()));
  s.pattern = OutlierPattern::none;
  EXPECT_TRUE(generate(s).contaminated_rows.empty());
}

TEST(Generate, OutlierErrorsCenterOnTwenty) {
  for (OutlierPattern pat : {OutlierPattern::a, OutlierPattern::b}) {
    SimulationSpec s;
    s.n = 1000;
    s.p = 15;
    s.epsilon = 0.3;
    s.pattern = pat;
    s.seed = 8;
    const SimulatedData sim = generate(s);
    const Vector beta = true_coefficients(s.p);
    double mean_err = 0.0, mean_x = 0.0;
    for (Eigen::Index i : sim.contaminated_rows) {
      mean_err += sim.train.y(i) - sim.train.x.row(i).dot(beta.tail(s.p));
      mean_x += sim.train.x.row(i).mean();
    }
    mean_err /= 300.0;
    mean_x /= 300.0;
    // 300 rows with sd 0.5: standard error about 0.03
    EXPECT_NEAR(mean_err, 20.0, 0.15);
    EXPECT_NEAR(mean_x, pat == OutlierPattern::a ? 0.0 : -1.5, 0.05);
  }
}

TEST(Generate, TestSetIsClean) {
  SimulationSpec s;
  s.epsilon = 0.3;
  s.n = 500;
  s.p = 12;
  const SimulatedData sim = generate(s);
  const Vector beta = true_coefficients(s.p);
  const Vector e = sim.test.y - sim.test.x * beta.tail(s.p);
  EXPECT_LT(e.cwiseAbs().maxCoeff(), 5.0 * s.noise_sd);
  EXPECT_EQ(sim.test.n(), s.n);
}

TEST(Generate, SameSeedIsBitIdentical) {
  const SimulatedData a = generate(small_spec());
  const SimulatedData b = generate(small_spec());
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.train.y, b.train.y);
  EXPECT_EQ(a.test.y, b.test.y);
  SimulationSpec other = small_spec();
  other.seed = 4;
  EXPECT_NE(generate(other).train.y, a.train.y);
}

TEST(SimulationSpec, Validation) {
  SimulationSpec s;
  s.epsilon = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SimulationSpec{};
  s.rho = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SimulationSpec{};
  s.p = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(parse_pattern("b"), OutlierPattern::b);
  EXPECT_EQ(to_string(OutlierPattern::none), "none");
  EXPECT_THROW(parse_pattern("c"), ConfigError);
}

TEST(RunExperiment, SingleReplicationIsDeterministic) {
  const ExperimentTable a = run_experiment(small_spec(), fast_methods(), 1, 9);
  const ExperimentTable b = run_experiment(small_spec(), fast_methods(), 1, 9);
  ASSERT_EQ(a.methods.size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(a.methods[m].successes + a.methods[m].failures, 1);
    if (a.methods[m].successes == 1) {
      EXPECT_EQ(a.methods[m].rmspe, b.methods[m].rmspe);
      EXPECT_EQ(a.methods[m].tnr, b.methods[m].tnr);
    }
  }
}

TEST(RunExperiment, ScoresMatchIndependentRecomputation) {
  const ExperimentTable t = run_experiment(small_spec(), fast_methods(), 2, 4);
  const auto& lasso = t.methods[1];
  ASSERT_EQ(lasso.successes, 2);
  double total = 0.0;
  for (const auto& r : lasso.replications) total += r.rmspe;
  EXPECT_NEAR(lasso.rmspe, total / 2.0, 1e-15);
}

TEST(RunExperiment, RejectsBadArguments) {
  EXPECT_THROW(run_experiment(small_spec(), fast_methods(), 0, 1), ConfigError);
  EXPECT_THROW(run_experiment(small_spec(), {}, 1, 1), ConfigError);
}
