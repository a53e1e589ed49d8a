#pragma once

// Independent oracles and fixtures shared by the test suites.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>

#include "gammareg/model_core.hpp"
#include "gammareg/random.hpp"

namespace testing_support {

using gammareg::Dataset;
using gammareg::Matrix;
using gammareg::ModelParams;
using gammareg::Rng;
using gammareg::Vector;

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                               int max_depth = 40) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Simpson over [c - w, c + w] split into unit-sd panels so narrow peaks are not skipped.
inline double simpson_line(const std::function<double(double)>& f, double c, double sd, double halfwidth_sd = 40.0,
                           double tol = 1e-13) {
  double total = 0.0;
  const int panels = static_cast<int>(2 * halfwidth_sd);
  for (int k = 0; k < panels; ++k) {
    const double a = c + (k - halfwidth_sd) * sd;
    total += adaptive_simpson(f, a, a + sd, tol / panels);
  }
  return total;
}

/// Minimizer of a smooth convex f on [a, b] by bisecting the sign of a central difference.
/// The difference is exact for quadratics, so the location is resolved far below sqrt(eps).
inline double slope_bisection(const std::function<double(double)>& f, double a, double b, double delta) {
  auto slope = [&](double t) { return f(t + delta) - f(t - delta); };
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    const double m = 0.5 * (a + b);
    if (slope(m) > 0.0) {
      b = m;
    } else {
      a = m;
    }
  }
  return 0.5 * (a + b);
}

/// Minimizer of smooth(t) + lambda |t| for smooth convex `smooth`. Each branch
/// smooth(t) +- lambda t is minimized on its own and kept only on its side of 0.
inline double l1_line_minimizer(const std::function<double(double)>& smooth, double lambda, double a, double b) {
  const double up = slope_bisection([&](double t) { return smooth(t) + lambda * t; }, a, b, 0.5);
  const double dn = slope_bisection([&](double t) { return smooth(t) - lambda * t; }, a, b, 0.5);
  double best = 0.0;
  double best_val = smooth(0.0);
  auto consider = [&](double t) {
    const double v = smooth(t) + lambda * std::abs(t);
    if (v < best_val) {
      best = t;
      best_val = v;
    }
  };
  if (up > 0.0) consider(up);
  if (dn < 0.0) consider(dn);
  return best;
}

/// OLS with intercept via the normal equations; returns (beta0, beta).
inline Vector ols_normal_equations(const Matrix& x, const Vector& y) {
  Matrix design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  const Matrix gram = design.transpose() * design;
  return gram.llt().solve(design.transpose() * y);
}

inline Dataset random_dataset(Rng& rng, Eigen::Index n, Eigen::Index p, double noise = 1.0) {
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  Vector beta(p);
  for (Eigen::Index j = 0; j < p; ++j) beta(j) = rng.normal(0.0, 2.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = rng.normal();
    d.y(i) = 0.5 + d.x.row(i).dot(beta) + rng.normal(0.0, noise);
  }
  return d;
}

inline ModelParams random_params(Rng& rng, Eigen::Index p, double scale = 1.0) {
  ModelParams t;
  t.beta0 = rng.normal(0.0, scale);
  t.beta.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) t.beta(j) = rng.normal(0.0, scale);
  t.sigma2 = 0.2 + 3.0 * rng.uniform();
  return t;
}

/// Direct normal-density evaluation without logs.
inline double normal_pdf(double y, double mu, double sigma2) {
  const double pi = 3.14159265358979323846;
  return std::exp(-(y - mu) * (y - mu) / (2.0 * sigma2)) / std::sqrt(2.0 * pi * sigma2);
}

}  // namespace testing_support
