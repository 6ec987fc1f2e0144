#pragma once

// Test-side oracles, deliberately independent of the library's closed forms:
// golden-section search, finite differences, exhaustive support enumeration,
// and seeded random problem generators.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "sdia/gaussian.hpp"
#include "sdia/observation_model.hpp"

namespace oracle {

using sdia::Matrix;
using sdia::Vector;

// Golden-section minimizer on [lo, hi]; assumes unimodality there.
inline double golden_section(const std::function<double(double)>& f,
                             double lo, double hi, double tol = 1e-12) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Expands the search interval until the minimum is interior, then refines.
inline double minimize_on_ray(const std::function<double(double)>& f,
                              double hi_start = 1.0) {
  double hi = hi_start;
  for (int i = 0; i < 200; ++i) {
    const double inside = f(0.75 * hi);
    if (std::isfinite(inside) && f(hi) > inside) break;
    hi *= 2.0;
    if (!std::isfinite(f(hi))) {  // hit an infeasibility barrier; back off
      hi *= 0.5;
      break;
    }
  }
  return golden_section(f, 0.0, hi);
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Matrix random_psd(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = gauss(rng);
  Matrix S = scale * (A * A.transpose()) / n;
  return 0.5 * (S + S.transpose());
}

inline sdia::ObservationModel random_model(std::uint64_t seed, int m, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  Matrix H(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = gauss(rng);
  Matrix Sxx = random_psd(rng, n, 1.0) + 0.25 * Matrix::Identity(n, n);
  return sdia::make_observation_model("random", H, Sxx, unif(rng));
}

// Best diagonal covariance on a fixed support by cyclic coordinate descent,
// each coordinate minimized with golden-section search. The diagonal cost is
// jointly convex, so this converges to the support's optimum.
inline double best_diagonal_cost(const sdia::ObservationModel& mod,
                                 const std::vector<int>& support,
                                 double lambda) {
  Vector diag = Vector::Zero(mod.m);
  auto cost_with = [&](int j, double v) {
    Vector d = diag;
    d(j) = v;
    return sdia::cost_J(mod, Matrix(d.asDiagonal()), lambda);
  };
  double prev = sdia::cost_J(mod, Matrix(diag.asDiagonal()), lambda);
  for (int cycle = 0; cycle < 60; ++cycle) {
    for (int j : support) {
      const double v =
          minimize_on_ray([&](double x) { return cost_with(j, x); },
                          std::max(1.0, 2.0 * diag(j)));
      diag(j) = v;
    }
    const double cur = sdia::cost_J(mod, Matrix(diag.asDiagonal()), lambda);
    if (prev - cur < 1e-13 * (1.0 + std::abs(cur))) break;
    prev = cur;
  }
  return prev;
}

// Exhaustive search over all k-subsets of {0..m-1}.
inline std::pair<std::vector<int>, double> brute_force_diagonal(
    const sdia::ObservationModel& mod, int k, double lambda) {
  std::vector<int> support(k);
  std::vector<int> best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      const double c = best_diagonal_cost(mod, support, lambda);
      if (c < best_cost) {
        best_cost = c;
        best = support;
      }
      return;
    }
    for (int j = start; j < mod.m; ++j) {
      support[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  return {best, best_cost};
}

// Coefficient of determination of the least-squares line through (x, y).
inline double linear_fit_r2(const std::vector<double>& xs,
                            const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double fit = slope * xs[i] + intercept;
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
}

}  // namespace oracle
