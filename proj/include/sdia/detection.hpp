#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sdia/gaussian.hpp"
#include "sdia/linalg.hpp"
#include "sdia/observation_model.hpp"
#include "sdia/random.hpp"

namespace sdia {

struct DetectionConfig {
  double tau = 2.0;          // LRT threshold on the likelihood ratio
  int n_samples = 100000;
  std::uint64_t seed = 0;
};

struct DetectionEstimate {
  double estimate = 0.0;
  double std_error = 0.0;    // sqrt(p (1 - p) / n)
};

// Log likelihood ratio of attacked vs nominal output laws at observation y:
//   log L(y) = 1/2 y^T (Sigma_YY^-1 - (Sigma_YY + Sigma_AA)^-1) y
//              + 1/2 (log|Sigma_YY| - log|Sigma_YY + Sigma_AA|).
inline double log_likelihood_ratio(const ObservationModel& mod,
                                   const Matrix& Sigma_AA, const Vector& y) {
  detail::check_attack_dims(mod, Sigma_AA);
  if (y.size() != mod.m) {
    throw validation_error("observation dimension mismatch");
  }
  Eigen::LLT<Matrix> llt0(mod.Sigma_YY);
  if (llt0.info() != Eigen::Success) {
    throw numerical_error("log_likelihood_ratio: Sigma_YY is not PD");
  }
  Eigen::LLT<Matrix> llt1(mod.Sigma_YY + Sigma_AA);
  if (llt1.info() != Eigen::Success) {
    throw numerical_error(
        "log_likelihood_ratio: attacked covariance is not PD");
  }
  const double ld0 = log_det_pd_or_throw(mod.Sigma_YY, "log_likelihood_ratio");
  const double ld1 = log_det_pd_or_throw(mod.Sigma_YY + Sigma_AA,
                                         "log_likelihood_ratio");
  const double quad = y.dot(llt0.solve(y)) - y.dot(llt1.solve(y));
  return 0.5 * quad + 0.5 * (ld0 - ld1);
}

namespace detail {

inline constexpr int kDetectionBatch = 8192;

// Monte-Carlo exceedance P(L(y) >= tau) with y drawn from the attacked law
// (under_attack) or the nominal law. Both hypotheses consume the identical
// standard-normal stream for a given seed, so estimates under the two laws
// are common-random-number coupled and Sigma_AA = 0 reproduces the nominal
// estimate exactly.
inline DetectionEstimate lrt_exceedance(const ObservationModel& mod,
                                        const Matrix& Sigma_AA,
                                        const DetectionConfig& cfg,
                                        bool under_attack) {
  check_attack_dims(mod, Sigma_AA);
  if (!(cfg.tau > 0.0)) {
    throw validation_error("LRT threshold tau must be positive");
  }
  if (cfg.n_samples < 1) {
    throw validation_error("sample count must be positive");
  }
  Eigen::LLT<Matrix> llt0(mod.Sigma_YY);
  if (llt0.info() != Eigen::Success) {
    throw numerical_error("detection: Sigma_YY is not PD");
  }
  Eigen::LLT<Matrix> llt1(mod.Sigma_YY + Sigma_AA);
  if (llt1.info() != Eigen::Success) {
    throw numerical_error("detection: attacked covariance is not PD");
  }
  const double ld0 = log_det_pd_or_throw(mod.Sigma_YY, "detection");
  const double ld1 = log_det_pd_or_throw(mod.Sigma_YY + Sigma_AA, "detection");
  const Matrix I = Matrix::Identity(mod.m, mod.m);
  const Matrix D = llt0.solve(I) - llt1.solve(I);
  const double const_term = 0.5 * (ld0 - ld1);
  const double log_tau = std::log(cfg.tau);
  const Matrix L = under_attack ? Matrix(llt1.matrixL()) : Matrix(llt0.matrixL());

  long long hits = 0;
  Vector z(mod.m), y(mod.m);
  int remaining = cfg.n_samples;
  int batch_index = 0;
  while (remaining > 0) {
    const int batch = std::min(remaining, kDetectionBatch);
    NormalStream rng(
        derive_seed(cfg.seed, "batch/" + std::to_string(batch_index)));
    for (int t = 0; t < batch; ++t) {
      for (int i = 0; i < mod.m; ++i) z(i) = rng.next();
      y.noalias() = L * z;
      const double stat = 0.5 * y.dot(D * y) + const_term;
      if (stat >= log_tau) ++hits;
    }
    remaining -= batch;
    ++batch_index;
  }
  DetectionEstimate est;
  est.estimate = static_cast<double>(hits) / cfg.n_samples;
  est.std_error =
      std::sqrt(est.estimate * (1.0 - est.estimate) / cfg.n_samples);
  return est;
}

}  // namespace detail

// P(detect): exceedance probability under the attacked output law.
inline DetectionEstimate detection_probability(const ObservationModel& mod,
                                               const Matrix& Sigma_AA,
                                               const DetectionConfig& cfg) {
  return detail::lrt_exceedance(mod, Sigma_AA, cfg, true);
}

// False-alarm rate: the same test statistic evaluated under the nominal law.
inline DetectionEstimate false_alarm_probability(const ObservationModel& mod,
                                                 const Matrix& Sigma_AA,
                                                 const DetectionConfig& cfg) {
  return detail::lrt_exceedance(mod, Sigma_AA, cfg, false);
}

}  // namespace sdia
