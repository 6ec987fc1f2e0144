#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdia/errors.hpp"

namespace sdia {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// log|M| for symmetric positive definite M via Cholesky. nullopt when the
// factorization fails, i.e. M is not PD to working precision; callers treat
// that as an infeasibility signal rather than an error.
inline std::optional<double> log_det_pd(const Matrix& M) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) return std::nullopt;
  double acc = 0.0;
  const Matrix& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double d = L(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    acc += std::log(d);
  }
  return 2.0 * acc;
}

inline double log_det_pd_or_throw(const Matrix& M, const char* context) {
  const auto v = log_det_pd(M);
  if (!v) {
    throw numerical_error(std::string(context) +
                          ": matrix is not positive definite");
  }
  return *v;
}

inline double max_abs(const Matrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) return false;
  if (M.size() == 0) return true;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

// Indices of rows that are not identically zero. For a symmetric matrix this
// is the support; the complement carries no mass and is skipped entirely by
// the eigendecomposition below so that exact zeros stay exact.
inline std::vector<int> nonzero_rows(const Matrix& M) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (!M.row(i).isZero(0.0)) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

struct SupportEigh {
  std::vector<int> index;  // rows/cols of the principal submatrix
  Vector eigenvalues;      // ascending
  Matrix eigenvectors;     // columns, same order
};

// Eigendecomposition of the principal submatrix over the nonzero rows of a
// symmetric matrix. Throws when the eigensolver itself fails.
inline SupportEigh eigh_on_support(const Matrix& S) {
  SupportEigh out;
  out.index = nonzero_rows(S);
  const int r = static_cast<int>(out.index.size());
  if (r == 0) {
    out.eigenvalues = Vector::Zero(0);
    out.eigenvectors = Matrix::Zero(0, 0);
    return out;
  }
  Matrix sub(r, r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) sub(a, b) = S(out.index[a], out.index[b]);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
  if (es.info() != Eigen::Success) {
    throw numerical_error("eigh_on_support: eigensolver failed to converge");
  }
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  return out;
}

}  // namespace sdia
