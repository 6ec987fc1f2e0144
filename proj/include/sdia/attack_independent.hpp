#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "sdia/gaussian.hpp"
#include "sdia/greedy_trace.hpp"
#include "sdia/linalg.hpp"
#include "sdia/observation_model.hpp"

namespace sdia {

// Sensitivities of the cost to a diagonal increment at sensor j:
//   alpha_j = [(Sigma_YY + Sigma_prev)^-1]_jj,
//   beta_j  = [Sigma_YY^-1]_jj.
// For PSD Sigma_prev these satisfy 0 < alpha_j <= beta_j <= 1/sigma2.
inline std::pair<double, double> alpha_beta(const ObservationModel& mod,
                                            const Matrix& Sigma_prev, int j) {
  detail::check_attack_dims(mod, Sigma_prev);
  if (j < 0 || j >= mod.m) {
    throw validation_error("sensor index out of range");
  }
  Eigen::LLT<Matrix> prev_llt(mod.Sigma_YY + Sigma_prev);
  if (prev_llt.info() != Eigen::Success) {
    throw numerical_error("alpha_beta: Sigma_YY + Sigma_prev is not PD");
  }
  Eigen::LLT<Matrix> yy_llt(mod.Sigma_YY);
  if (yy_llt.info() != Eigen::Success) {
    throw numerical_error("alpha_beta: Sigma_YY is not PD");
  }
  Vector e = Vector::Zero(mod.m);
  e(j) = 1.0;
  const double alpha = prev_llt.solve(e)(j);
  const double beta = yy_llt.solve(e)(j);
  const double slack = 1.0 + 1e-9;
  if (!(alpha > 0.0) || alpha > beta * slack + 1e-15 ||
      beta > slack / mod.sigma2) {
    throw numerical_error("alpha_beta: sensitivity ordering violated");
  }
  return {alpha, beta};
}

// Scalar cost increment of raising sensor j's variance by v on top of a
// covariance whose row/column j is zero:
//   g(v) = (1 - lambda) log(1 + alpha v) - log(1 + v / sigma2) + lambda beta v.
inline double scalar_increment(double alpha, double beta, double sigma2,
                               double lambda, double v) {
  return (1.0 - lambda) * std::log1p(alpha * v) - std::log1p(v / sigma2) +
         lambda * beta * v;
}

// Unique positive stationary point of g, when one exists. Stationarity is
// the quadratic
//   beta alpha v^2 + (beta - alpha + beta alpha sigma2) v
//     + (beta sigma2 - alpha sigma2 + (alpha sigma2 - 1)/lambda) = 0,
// whose constant term c equals (sigma2/lambda) g'(0): a positive root exists
// iff c < 0 (g is strictly convex on the feasible ray). nullopt means no
// improving variance exists at this sensor.
inline std::optional<double> optimal_variance(double alpha, double beta,
                                              double sigma2, double lambda) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw validation_error("sensitivities must be positive");
  }
  if (!(sigma2 > 0.0)) {
    throw validation_error("noise variance must be positive");
  }
  detail::check_lambda(lambda);
  const double c =
      beta * sigma2 - alpha * sigma2 + (alpha * sigma2 - 1.0) / lambda;
  if (c >= 0.0) return std::nullopt;
  const double a = beta * alpha;
  const double b = beta - alpha + beta * alpha * sigma2;
  const double disc = b * b - 4.0 * a * c;
  // c < 0 with a > 0 forces disc > b^2 >= 0; the stable-root form avoids
  // cancellation between b and sqrt(disc).
  const double v = -2.0 * c / (b + std::sqrt(disc));
  if (!std::isfinite(v) || !(v > 0.0)) {
    throw numerical_error("optimal_variance: root computation failed");
  }
  return v;
}

// Greedy diagonal construction: each epoch scores every unselected sensor
// with its closed-form optimal variance, takes the best strict improvement
// (ties broken toward the lowest index), and stops early with the shortfall
// flag when no candidate improves the cost.
inline std::pair<AttackPlan, GreedyTrace> greedy_independent(
    const ObservationModel& mod, int k, double lambda) {
  detail::check_lambda(lambda);
  if (k < 1 || k > mod.m) {
    throw validation_error("sensor budget k must lie in [1, m]");
  }

  Eigen::LLT<Matrix> yy_llt(mod.Sigma_YY);
  if (yy_llt.info() != Eigen::Success) {
    throw numerical_error("greedy_independent: Sigma_YY is not PD");
  }
  const Vector beta = yy_llt.solve(Matrix::Identity(mod.m, mod.m)).diagonal();

  Vector diag = Vector::Zero(mod.m);
  std::vector<char> taken(mod.m, 0);

  GreedyTrace trace;
  trace.J_start = cost_J(mod, Matrix::Zero(mod.m, mod.m), lambda);
  double J = trace.J_start;

  AttackPlan plan;
  plan.lambda = lambda;
  plan.k = k;

  for (int epoch = 1; epoch <= k; ++epoch) {
    Matrix A = mod.Sigma_YY;
    A.diagonal() += diag;
    Eigen::LLT<Matrix> a_llt(A);
    if (a_llt.info() != Eigen::Success) {
      throw numerical_error("greedy_independent: working covariance lost PD");
    }
    const Vector alpha =
        a_llt.solve(Matrix::Identity(mod.m, mod.m)).diagonal();

    GreedyEpoch rec;
    rec.epoch = epoch;
    int best_j = -1;
    double best_f = 0.0;
    double best_v = 0.0;
    for (int j = 0; j < mod.m; ++j) {
      if (taken[j]) continue;
      const auto v = optimal_variance(alpha(j), beta(j), mod.sigma2, lambda);
      double f = std::numeric_limits<double>::quiet_NaN();
      if (v) {
        f = scalar_increment(alpha(j), beta(j), mod.sigma2, lambda, *v);
        if (best_j < 0 || f < best_f) {
          best_j = j;
          best_f = f;
          best_v = *v;
        }
      }
      rec.scores.push_back({j, f});
    }
    if (best_j < 0) {
      trace.shortfall = true;
      break;
    }
    taken[best_j] = 1;
    diag(best_j) += best_v;
    J += best_f;
    plan.support.push_back(best_j);

    rec.selected_index = best_j;
    rec.v_star = best_v;
    rec.J_after = J;
    trace.epochs.push_back(std::move(rec));
  }

  plan.Sigma_AA = Matrix(diag.asDiagonal());
  return {std::move(plan), std::move(trace)};
}

}  // namespace sdia
