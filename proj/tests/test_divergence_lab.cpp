#include <gtest/gtest.h>

#include <cmath>

#include "gammareg/divergence_lab.hpp"
#include "support.hpp"

using namespace gammareg;
using namespace gammareg::lab;
using testing_support::normal_pdf;
using testing_support::simpson_line;

namespace {

constexpr double kPi = 3.14159265358979323846;

// int N(y; a, s) N(y; b, t)^gamma dy in closed form.
double gaussian_cross_power(double a, double s, double b, double t, double gamma) {
  return std::pow(2.0 * kPi * t, -gamma / 2.0) * std::sqrt(2.0 * kPi * t / gamma) * normal_pdf(a, b, s + t / gamma);
}

double gaussian_kl(double m1, double s1, double m2, double s2) {
  return 0.5 * std::log(s2 / s1) + (s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2) - 0.5;
}

}  // namespace

TEST(CrossPowerIntegral, MatchesGaussianClosedForm) {
  Rng rng(1);
  for (int k = 0; k < 30; ++k) {
    const double a = rng.normal(0.0, 2.0), b = rng.normal(0.0, 2.0);
    const double s = 0.1 + 2.0 * rng.uniform(), t = 0.1 + 2.0 * rng.uniform();
    const double g = 0.05 + rng.uniform();
    const double closed = gaussian_cross_power(a, s, b, t, g);
    EXPECT_NEAR(cross_power_integral({{1.0, a, s}}, {{1.0, b, t}}, g), closed, 1e-11 * closed);
  }
}

TEST(CrossPowerIntegral, MixtureMatchesSimpson) {
  const Mixture h{{0.7, 0.0, 1.0}, {0.3, 6.0, 0.04}};
  const Mixture f{{1.0, 0.8, 1.5}};
  for (double g : {0.1, 0.5, 1.0}) {
    auto integrand = [&](double y) {
      const double hv = 0.7 * normal_pdf(y, 0.0, 1.0) + 0.3 * normal_pdf(y, 6.0, 0.04);
      return hv * std::pow(normal_pdf(y, 0.8, 1.5), g);
    };
    const double oracle = simpson_line(integrand, 3.0, 0.2, 100.0, 1e-14);
    EXPECT_NEAR(cross_power_integral(h, f, g), oracle, 1e-10 * oracle);
  }
}

TEST(SelfPowerIntegral, MatchesClosedForm) {
  for (double s2 : {0.25, 1.0, 4.0})
    for (double g : {0.1, 0.5, 2.0}) {
      const double closed = std::pow(2.0 * kPi * s2, -g / 2.0) / std::sqrt(1.0 + g);
      EXPECT_NEAR(self_power_integral({{1.0, -0.3, s2}}, g), closed, 1e-12 * closed);
    }
}

TEST(GammaDivergence, IdentityIsZero) {
  const ContaminationModel m = shifted_outlier_model(4.0, 0.0);
  for (double g : {0.1, 0.5, 1.0}) EXPECT_NEAR(gamma_divergence(m, m.target, g), 0.0, 1e-12);
}

TEST(GammaDivergence, NonNegativeOnRandomPairs) {
  Rng rng(2);
  for (int k = 0; k < 10; ++k) {
    ContaminationModel m = shifted_outlier_model(2.0 + 5.0 * rng.uniform(), 0.4 * rng.uniform());
    const ModelParams f{rng.normal(), Vector::Constant(1, rng.normal()), 0.3 + 2.0 * rng.uniform()};
    for (double g : {0.1, 0.5}) EXPECT_GE(gamma_divergence(m, f, g), -1e-12);
  }
}

TEST(KlDivergence, MatchesGaussianClosedForm) {
  const ContaminationModel m = shifted_outlier_model(5.0, 0.0);
  const ModelParams f{0.2, Vector::Constant(1, 1.0), 1.7};
  double expect = 0.0;
  for (const auto& a : m.atoms)
    expect += a.prob * gaussian_kl(mean_at(m.target, a.x), m.target.sigma2, mean_at(f, a.x), f.sigma2);
  EXPECT_NEAR(kl_divergence(m, f), expect, 1e-10);
}

TEST(GammaDivergence, GapToKlShrinksLinearlyInGamma) {
  const ContaminationModel m = shifted_outlier_model(3.0, 0.1);
  const ModelParams f{0.7, Vector::Constant(1, 1.0), 1.3};
  const double kl = kl_divergence(m, f);
  const double g1 = gamma_divergence(m, f, 0.0025) - kl;
  const double g2 = gamma_divergence(m, f, 0.005) - kl;
  const double g4 = gamma_divergence(m, f, 0.01) - kl;
  EXPECT_NEAR(g2 / g1, 2.0, 0.05);
  EXPECT_NEAR(g4 / g2, 2.0, 0.05);
  EXPECT_LT(std::abs(gamma_divergence(m, f, 2.5e-5) - kl), 0.02 * std::abs(g1));
}

TEST(Pythagorean, VanishesWithoutContamination) {
  const ContaminationModel m = shifted_outlier_model(8.0, 0.0);
  const ModelParams theta = perturbed_candidate(m.target);
  EXPECT_LE(std::abs(pythagorean_residual_homogeneous(m, theta, 0.5).residual), 1e-8);
  EXPECT_LE(std::abs(pythagorean_residual_direct(m, theta, 0.5)), 1e-8);
}

TEST(Pythagorean, VanishesAtTarget) {
  const ContaminationModel m = shifted_outlier_model(8.0, 0.2);
  EXPECT_EQ(pythagorean_residual_homogeneous(m, m.target, 0.5).residual, 0.0);
}

TEST(Pythagorean, HeterogeneousWithConstantEpsilonMatchesHomogeneous) {
  const ContaminationModel m = shifted_outlier_model(6.0, 0.2);
  const ModelParams theta = perturbed_candidate(m.target);
  const double a = pythagorean_residual_homogeneous(m, theta, 0.3).residual;
  const double b = pythagorean_residual_heterogeneous(m, theta, 0.3).residual;
  EXPECT_NEAR(a, b, 1e-15 + 1e-12 * std::abs(a));
}

TEST(Pythagorean, HomogeneousRejectsVaryingEpsilon) {
  const ContaminationModel m = heterogeneous(shifted_outlier_model(6.0, 0.2), 0.2);
  EXPECT_THROW(pythagorean_residual_homogeneous(m, m.target, 0.3), ConfigError);
}

TEST(Pythagorean, StableFormAgreesWithDirectEvaluation) {
  for (double off : {2.0, 3.0, 4.0}) {
    for (int hetero = 0; hetero < 2; ++hetero) {
      ContaminationModel m = shifted_outlier_model(off, 0.2);
      if (hetero) m = heterogeneous(m, 0.2);
      const ModelParams theta = perturbed_candidate(m.target);
      const double stable = pythagorean_residual_heterogeneous(m, theta, 0.5).residual;
      const double direct = pythagorean_residual_direct(m, theta, 0.5);
      EXPECT_NEAR(stable, direct, 1e-9);
      EXPECT_GT(std::abs(stable), 1e-4);
    }
  }
}

TEST(Pythagorean, ResidualWithinBound) {
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const double off = 3.0 + 20.0 * rng.uniform();
    ContaminationModel m = heterogeneous(shifted_outlier_model(off, 0.4 * rng.uniform() + 0.01), 0.3);
    const ModelParams theta{m.target.beta0 + rng.normal(0.0, 0.3), m.target.beta, m.target.sigma2 * (0.7 + 0.6 * rng.uniform())};
    const PythagoreanResult r = pythagorean_residual_heterogeneous(m, theta, 0.5);
    EXPECT_LE(std::abs(r.residual), r.bound);
  }
}

TEST(Pythagorean, StableUnderHalvingSpikeWidth) {
  ContaminationModel m = shifted_outlier_model(5.0, 0.2);
  const ModelParams theta = perturbed_candidate(m.target);
  const double wide = pythagorean_residual_homogeneous(m, theta, 0.5).residual;
  m.delta_sd_ratio *= 0.5;
  const double narrow = pythagorean_residual_homogeneous(m, theta, 0.5).residual;
  EXPECT_NEAR(wide, narrow, 1e-3 * std::abs(wide));
}

TEST(ContaminationModel, Validation) {
  ContaminationModel m = shifted_outlier_model(5.0, 0.5);
  EXPECT_THROW(m.validate(), ConfigError);
  m = shifted_outlier_model(5.0, 0.1);
  m.atoms.front().prob += 0.1;
  EXPECT_THROW(m.validate(), ConfigError);
  m = shifted_outlier_model(5.0, 0.1);
  m.delta_location = nullptr;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Psi, AnnihilatesDistantObservations) {
  const ModelParams t{0.0, Vector::Constant(2, 1.0), 1.0};
  const Vector x = Vector::Constant(2, 0.5);
  for (double g : {0.1, 0.5})
    for (double y : {1e6, -1e6}) EXPECT_LT(psi_function(y, x, t, {g, 0.3}).cwiseAbs().maxCoeff(), 1e-100);
}

TEST(Psi, InterceptComponentVanishesAtExactFit) {
  const ModelParams t{0.4, Vector::Constant(1, 2.0), 0.5};
  const Vector x = Vector::Constant(1, -0.7);
  EXPECT_EQ(psi_function(mean_at(t, x), x, t, {0.5, 0.0})(0), 0.0);
}

TEST(Psi, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const Dataset d = testing_support::random_dataset(rng, 40, 2, 0.8);
  const ModelParams at{0.6, (Vector(2) << 0.5, -0.3).finished(), 1.4};
  for (double g : {0.2, 0.7}) {
    const GammaConfig gc{g, 0.0};
    const Vector grad = loss_gradient_from_psi(d, at, gc);
    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      ModelParams up = at, dn = at;
      if (k == 0) {
        up.beta0 += h;
        dn.beta0 -= h;
      } else if (k < 3) {
        up.beta(k - 1) += h;
        dn.beta(k - 1) -= h;
      } else {
        up.sigma2 += h;
        dn.sigma2 -= h;
      }
      const double fd = (penalized_loss(d, up, gc) - penalized_loss(d, dn, gc)) / (2.0 * h);
      EXPECT_NEAR(grad(k), fd, 1e-7);
    }
  }
}

TEST(Suites, AllPassAtDefaultTolerance) {
  for (const SuiteReport& r : all_suites()) {
    EXPECT_TRUE(r.pass()) << r.suite;
    for (const Check& c : r.checks) EXPECT_TRUE(c.pass) << r.suite << ": " << c.name << " value " << c.value;
  }
}

TEST(Suites, TightenedTolerancesCanFail) {
  SuiteConfig cfg;
  cfg.tolerance_scale = 1e-12;
  cfg.random_models = 2;
  EXPECT_FALSE(divergence_suite(cfg).pass());
}

TEST(Suites, RejectBadConfig) {
  SuiteConfig cfg;
  cfg.tolerance_scale = 0.0;
  EXPECT_THROW(divergence_suite(cfg), ConfigError);
  cfg.tolerance_scale = -1.0;
  EXPECT_THROW(pythagorean_suite(cfg), ConfigError);
  cfg = SuiteConfig{};
  cfg.epsilons = {0.6};
  EXPECT_THROW(pythagorean_suite(cfg), ConfigError);
}
