#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdia/linalg.hpp"
#include "sdia/observation_model.hpp"
#include "sdia/random.hpp"

namespace sdia {

// Attack distribution over the m sensors: zero-mean Gaussian with
// covariance Sigma_AA supported on `support` (selection order preserved).
// Rows and columns off the support are exactly zero.
struct AttackPlan {
  std::vector<int> support;
  Matrix Sigma_AA;
  double lambda = 1.0;
  int k = 0;
};

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda >= 1.0)) {
    throw validation_error("stealth weight lambda must be >= 1");
  }
}

inline void check_attack_dims(const ObservationModel& mod, const Matrix& S) {
  if (S.rows() != mod.m || S.cols() != mod.m) {
    throw validation_error("attack covariance must be m x m (m = " +
                           std::to_string(mod.m) + ")");
  }
}

}  // namespace detail

// Design objective: (1-lambda) log|Sigma_YY + Sigma_AA|
//                   - log|sigma2 I + Sigma_AA| + lambda tr(Sigma_YY^-1 Sigma_AA).
// Smaller is better. Throws numerical_error when either log-det argument
// fails Cholesky, i.e. the attack covariance is not PSD enough to be usable.
inline double cost_J(const ObservationModel& mod, const Matrix& Sigma_AA,
                     double lambda) {
  detail::check_lambda(lambda);
  detail::check_attack_dims(mod, Sigma_AA);
  const double ld1 =
      log_det_pd_or_throw(mod.Sigma_YY + Sigma_AA, "cost_J observed term");
  const double ld2 = log_det_pd_or_throw(
      mod.sigma2 * Matrix::Identity(mod.m, mod.m) + Sigma_AA,
      "cost_J stealth term");
  Eigen::LLT<Matrix> yy(mod.Sigma_YY);
  const double tr = yy.solve(Sigma_AA).trace();
  return (1.0 - lambda) * ld1 - ld2 + lambda * tr;
}

// Exact cost increment: cost_J(Sigma1 + Delta) - cost_J(Sigma1), evaluated
// as log-det differences so the identity holds to rounding. Delta must be
// symmetric and keep both log-det arguments PD.
inline double cost_diff_f(const ObservationModel& mod, const Matrix& Sigma1,
                          const Matrix& Delta, double lambda) {
  detail::check_lambda(lambda);
  detail::check_attack_dims(mod, Sigma1);
  detail::check_attack_dims(mod, Delta);
  const Matrix I = Matrix::Identity(mod.m, mod.m);
  const double ld1a =
      log_det_pd_or_throw(mod.Sigma_YY + Sigma1, "cost_diff_f base");
  const double ld1b = log_det_pd_or_throw(mod.Sigma_YY + Sigma1 + Delta,
                                          "cost_diff_f incremented");
  const double ld2a =
      log_det_pd_or_throw(mod.sigma2 * I + Sigma1, "cost_diff_f base");
  const double ld2b = log_det_pd_or_throw(mod.sigma2 * I + Sigma1 + Delta,
                                          "cost_diff_f incremented");
  Eigen::LLT<Matrix> yy(mod.Sigma_YY);
  const double tr = yy.solve(Delta).trace();
  return (1.0 - lambda) * (ld1b - ld1a) - (ld2b - ld2a) + lambda * tr;
}

// Information rate the observations carry about the state under attack,
// I = 1/2 (log|Sigma_YY + Sigma_AA| - log|sigma2 I + Sigma_AA|);
// the attack design drives this down subject to the stealth penalty.
inline double mutual_information(const ObservationModel& mod,
                                 const Matrix& Sigma_AA) {
  detail::check_attack_dims(mod, Sigma_AA);
  const double ld1 = log_det_pd_or_throw(mod.Sigma_YY + Sigma_AA,
                                         "mutual_information");
  const double ld2 = log_det_pd_or_throw(
      mod.sigma2 * Matrix::Identity(mod.m, mod.m) + Sigma_AA,
      "mutual_information");
  return 0.5 * (ld1 - ld2);
}

// Detectability proxy: KL divergence between the attacked and nominal
// output laws, 1/2 (tr(Sigma_YY^-1 Sigma_AA) - log|I + Sigma_YY^-1 Sigma_AA|).
inline double kl_divergence(const ObservationModel& mod,
                            const Matrix& Sigma_AA) {
  detail::check_attack_dims(mod, Sigma_AA);
  Eigen::LLT<Matrix> yy(mod.Sigma_YY);
  const double tr = yy.solve(Sigma_AA).trace();
  const double ld1 =
      log_det_pd_or_throw(mod.Sigma_YY + Sigma_AA, "kl_divergence");
  const double ld0 = log_det_pd_or_throw(mod.Sigma_YY, "kl_divergence");
  return 0.5 * (tr - (ld1 - ld0));
}

// Support-free stationary covariance lambda^{-1/2} H Sigma_XX H^T. Exact
// minimizer only in the zero-noise limit; used as a reference point, not as
// a certified bound.
inline Matrix unconstrained_optimum(const ObservationModel& mod,
                                    double lambda) {
  detail::check_lambda(lambda);
  Matrix K = mod.H * mod.Sigma_XX * mod.H.transpose();
  K = (0.5 * (K + K.transpose())).eval();  // temp: K aliases both sides
  return std::pow(lambda, -0.5) * K;
}

// Structural checks on a plan against a model dimension. Tolerance on the
// PSD test: smallest eigenvalue >= -1e-10 * max(1, largest eigenvalue).
inline void validate_attack_plan(const AttackPlan& plan, int m) {
  if (plan.Sigma_AA.rows() != m || plan.Sigma_AA.cols() != m) {
    throw validation_error("attack covariance must be m x m");
  }
  if (plan.k < 0 || plan.k > m) {
    throw validation_error("sensor budget k must lie in [0, m]");
  }
  if (static_cast<int>(plan.support.size()) > plan.k) {
    throw validation_error("support larger than the sensor budget k");
  }
  detail::check_lambda(plan.lambda);
  std::vector<char> seen(m, 0);
  for (int j : plan.support) {
    if (j < 0 || j >= m) {
      throw validation_error("support index out of range: " +
                             std::to_string(j));
    }
    if (seen[j]) {
      throw validation_error("duplicate support index: " + std::to_string(j));
    }
    seen[j] = 1;
  }
  if (!is_symmetric(plan.Sigma_AA,
                    1e-12 * std::max(1.0, max_abs(plan.Sigma_AA)))) {
    throw numerical_error("attack covariance is not symmetric");
  }
  for (int i = 0; i < m; ++i) {
    if (seen[i]) continue;
    if (!plan.Sigma_AA.row(i).isZero(0.0)) {
      throw numerical_error("attack covariance has mass off the support (row " +
                            std::to_string(i) + ")");
    }
  }
  const SupportEigh eig = eigh_on_support(plan.Sigma_AA);
  if (eig.eigenvalues.size() > 0) {
    const double largest = eig.eigenvalues(eig.eigenvalues.size() - 1);
    const double floor = -1e-10 * std::max(1.0, largest);
    if (eig.eigenvalues(0) < floor) {
      throw numerical_error("attack covariance is not PSD (min eigenvalue " +
                            std::to_string(eig.eigenvalues(0)) + ")");
    }
  }
}

// Draws `count` attack vectors, rows of the returned count x m matrix.
// Support-aware eigenfactor sampling: off-support coordinates are exactly
// zero. Eigenvalues below -1e-8 are an error; small negatives are clipped.
inline Matrix sample_attack(const Matrix& Sigma_AA, int count,
                            std::uint64_t seed) {
  if (count < 0) throw validation_error("sample count must be nonnegative");
  if (!is_symmetric(Sigma_AA, 1e-12 * std::max(1.0, max_abs(Sigma_AA)))) {
    throw numerical_error("attack covariance is not symmetric");
  }
  const int m = static_cast<int>(Sigma_AA.rows());
  Matrix out = Matrix::Zero(count, m);
  const SupportEigh eig = eigh_on_support(Sigma_AA);
  const int r = static_cast<int>(eig.index.size());
  if (r == 0) return out;
  Vector scale(r);
  for (int i = 0; i < r; ++i) {
    const double ev = eig.eigenvalues(i);
    if (ev < -1e-8) {
      throw numerical_error("attack covariance eigenvalue " +
                            std::to_string(ev) + " is negative");
    }
    scale(i) = std::sqrt(std::max(ev, 0.0));
  }
  NormalStream rng(seed);
  Vector z(r);
  for (int s = 0; s < count; ++s) {
    for (int i = 0; i < r; ++i) z(i) = scale(i) * rng.next();
    const Vector a = eig.eigenvectors * z;
    for (int i = 0; i < r; ++i) out(s, eig.index[i]) = a(i);
  }
  return out;
}

// JSON schema: {support, sigma_aa (row-major lower triangle incl. the
// diagonal), lambda, k}. The triangle is mirrored on load, so symmetry is
// exact by construction.
inline nlohmann::json attack_plan_to_json(const AttackPlan& plan) {
  const int m = static_cast<int>(plan.Sigma_AA.rows());
  std::vector<double> tri;
  tri.reserve(static_cast<std::size_t>(m) * (m + 1) / 2);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) tri.push_back(plan.Sigma_AA(i, j));
  nlohmann::json j;
  j["support"] = plan.support;
  j["sigma_aa"] = tri;
  j["lambda"] = plan.lambda;
  j["k"] = plan.k;
  return j;
}

inline AttackPlan attack_plan_from_json(const nlohmann::json& j, int m) {
  AttackPlan plan;
  try {
    plan.support = j.at("support").get<std::vector<int>>();
    const auto tri = j.at("sigma_aa").get<std::vector<double>>();
    const std::size_t want =
        static_cast<std::size_t>(m) * static_cast<std::size_t>(m + 1) / 2;
    if (tri.size() != want) {
      throw validation_error("sigma_aa has " + std::to_string(tri.size()) +
                             " entries, expected " + std::to_string(want));
    }
    plan.Sigma_AA = Matrix::Zero(m, m);
    std::size_t t = 0;
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c <= i; ++c) {
        plan.Sigma_AA(i, c) = tri[t];
        plan.Sigma_AA(c, i) = tri[t];
        ++t;
      }
    }
    plan.lambda = j.at("lambda").get<double>();
    plan.k = j.at("k").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("bad attack JSON: ") + e.what());
  }
  validate_attack_plan(plan, m);
  return plan;
}

}  // namespace sdia
