#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "sdia/attack_independent.hpp"
#include "sdia/gaussian.hpp"
#include "sdia/greedy_trace.hpp"
#include "sdia/linalg.hpp"
#include "sdia/observation_model.hpp"

namespace sdia {

// Rank-<=2 covariance increment centered on a pivot sensor:
//   Delta = s e_p^T + e_p s^T,  Delta_pp = 2 s_p.
// s_p >= 0 keeps the pivot's variance increment nonnegative.
struct CorrelatedUpdate {
  int pivot = -1;
  Vector s;
};

inline Matrix make_delta(const CorrelatedUpdate& u) {
  const int m = static_cast<int>(u.s.size());
  if (u.pivot < 0 || u.pivot >= m) {
    throw validation_error("pivot index out of range");
  }
  if (u.s(u.pivot) < 0.0) {
    throw validation_error("pivot coordinate of the coupling vector must be "
                           "nonnegative");
  }
  Matrix delta = Matrix::Zero(m, m);
  delta.col(u.pivot) += u.s;
  delta.row(u.pivot) += u.s.transpose();
  return delta;
}

struct CorrelatedOptions {
  double tol = 1e-8;       // reduced-gradient norm target
  int iter_cap = 10000;    // inner solver iteration cap
  bool project_each_epoch = false;
};

struct SubproblemResult {
  CorrelatedUpdate update;
  double objective = 0.0;  // cost increment relative to Sigma_prev
  int iterations = 0;
  bool warning = false;    // stopped above tolerance (cap or stall)
};

namespace detail {

// Shared per-epoch quantities: base covariances with Sigma_prev already
// folded in, their log-dets, and the nominal inverse's pivot columns.
struct CorrelatedContext {
  const ObservationModel* mod = nullptr;
  double lambda = 1.0;
  Matrix P0;  // Sigma_YY + Sigma_prev
  Matrix Q0;  // sigma2 I + Sigma_prev
  double ld_P0 = 0.0;
  double ld_Q0 = 0.0;
  Eigen::LLT<Matrix> yy_llt;
};

inline CorrelatedContext make_context(const ObservationModel& mod,
                                      const Matrix& Sigma_prev,
                                      double lambda) {
  check_lambda(lambda);
  check_attack_dims(mod, Sigma_prev);
  CorrelatedContext ctx;
  ctx.mod = &mod;
  ctx.lambda = lambda;
  ctx.P0 = mod.Sigma_YY + Sigma_prev;
  ctx.Q0 = mod.sigma2 * Matrix::Identity(mod.m, mod.m) + Sigma_prev;
  ctx.ld_P0 = log_det_pd_or_throw(ctx.P0, "correlated subproblem base");
  ctx.ld_Q0 = log_det_pd_or_throw(ctx.Q0, "correlated subproblem base");
  ctx.yy_llt.compute(mod.Sigma_YY);
  if (ctx.yy_llt.info() != Eigen::Success) {
    throw numerical_error("correlated subproblem: Sigma_YY is not PD");
  }
  return ctx;
}

struct FeasiblePoint {
  double f = 0.0;
  Eigen::LLT<Matrix> llt_P;
  Eigen::LLT<Matrix> llt_Q;
};

// Objective at Delta(s); nullopt when the trial point leaves the PD cone.
inline std::optional<FeasiblePoint> eval_point(const CorrelatedContext& ctx,
                                               int pivot, const Vector& s,
                                               double lin_term) {
  const int m = ctx.mod->m;
  Matrix delta = Matrix::Zero(m, m);
  delta.col(pivot) += s;
  delta.row(pivot) += s.transpose();
  FeasiblePoint pt;
  pt.llt_P.compute(ctx.P0 + delta);
  if (pt.llt_P.info() != Eigen::Success) return std::nullopt;
  pt.llt_Q.compute(ctx.Q0 + delta);
  if (pt.llt_Q.info() != Eigen::Success) return std::nullopt;
  auto half_logdet = [](const Eigen::LLT<Matrix>& llt) -> std::optional<double> {
    double acc = 0.0;
    const Matrix& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const double d = L(i, i);
      if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
      acc += std::log(d);
    }
    return acc;
  };
  const auto hp = half_logdet(pt.llt_P);
  const auto hq = half_logdet(pt.llt_Q);
  if (!hp || !hq) return std::nullopt;
  pt.f = (1.0 - ctx.lambda) * (2.0 * *hp - ctx.ld_P0) -
         (2.0 * *hq - ctx.ld_Q0) + lin_term;
  return pt;
}

}  // namespace detail

// Cost increment of applying the coupled update (pivot, s) on top of
// Sigma_prev. nullopt when the update is infeasible (a log-det argument
// loses positive definiteness).
inline std::optional<double> subproblem_objective(const ObservationModel& mod,
                                                  const Matrix& Sigma_prev,
                                                  int pivot, const Vector& s,
                                                  double lambda) {
  if (pivot < 0 || pivot >= mod.m || s.size() != mod.m) {
    throw validation_error("bad pivot or coupling vector dimension");
  }
  const auto ctx = detail::make_context(mod, Sigma_prev, lambda);
  Vector e = Vector::Zero(mod.m);
  e(pivot) = 1.0;
  const Vector b = ctx.yy_llt.solve(e);
  const auto pt = detail::eval_point(ctx, pivot, s, 2.0 * lambda * b.dot(s));
  if (!pt) return std::nullopt;
  return pt->f;
}

// Gradient of the increment with respect to s (full length m; callers
// restrict to their working coordinates):
//   grad = 2 [ (1-lambda) (P0+Delta)^-1 + lambda Sigma_YY^-1 - (Q0+Delta)^-1 ] e_p.
inline Vector subproblem_gradient(const ObservationModel& mod,
                                  const Matrix& Sigma_prev, int pivot,
                                  const Vector& s, double lambda) {
  if (pivot < 0 || pivot >= mod.m || s.size() != mod.m) {
    throw validation_error("bad pivot or coupling vector dimension");
  }
  const auto ctx = detail::make_context(mod, Sigma_prev, lambda);
  Vector e = Vector::Zero(mod.m);
  e(pivot) = 1.0;
  const Vector b = ctx.yy_llt.solve(e);
  const auto pt = detail::eval_point(ctx, pivot, s, 2.0 * lambda * b.dot(s));
  if (!pt) {
    throw numerical_error("subproblem_gradient: point is infeasible");
  }
  const Vector uP = pt->llt_P.solve(e);
  const Vector uQ = pt->llt_Q.solve(e);
  return 2.0 * ((1.0 - lambda) * uP + lambda * b - uQ);
}

namespace detail {

// Damped Newton on the convex coupled subproblem, restricted to the working
// set R = support + pivot, with the single bound s_p >= 0 handled by
// projection. The Hessian restricted to coordinates (a, b) is
//   2 (lambda-1) [ (P^-1)_ab (u_P)_p + (u_P)_a (u_P)_b ]
//   + 2 [ (Q^-1)_ab (u_Q)_p + (u_Q)_a (u_Q)_b ],
// positive definite for lambda >= 1, so undamped steps are descent
// directions and backtracking only guards the PD-cone boundary.
inline SubproblemResult solve_in_context(const CorrelatedContext& ctx,
                                         int pivot,
                                         const std::vector<int>& support,
                                         const CorrelatedOptions& opts,
                                         std::optional<double> v_init) {
  const ObservationModel& mod = *ctx.mod;
  const int m = mod.m;

  std::vector<int> R = support;
  if (std::find(R.begin(), R.end(), pivot) == R.end()) R.push_back(pivot);
  std::sort(R.begin(), R.end());
  const int r = static_cast<int>(R.size());

  Vector e = Vector::Zero(m);
  e(pivot) = 1.0;
  const Vector b = ctx.yy_llt.solve(e);

  Vector s = Vector::Zero(m);
  if (v_init && *v_init > 0.0) s(pivot) = 0.5 * *v_init;
  auto cur = eval_point(ctx, pivot, s, 2.0 * ctx.lambda * b.dot(s));
  if (!cur) {
    // The diagonal seed cannot leave the cone; fall back to the origin.
    s.setZero();
    cur = eval_point(ctx, pivot, s, 0.0);
    if (!cur) {
      throw numerical_error("correlated subproblem: base point infeasible");
    }
  }

  SubproblemResult res;
  res.update.pivot = pivot;

  while (true) {
    const Vector uP = cur->llt_P.solve(e);
    const Vector uQ = cur->llt_Q.solve(e);
    const Vector g_full =
        2.0 * ((1.0 - ctx.lambda) * uP + ctx.lambda * b - uQ);

    // KKT residual: coordinates in R, with the pivot bound active when
    // s_p = 0 and the gradient pushes outward.
    double g_norm2 = 0.0;
    for (int a : R) {
      double ga = g_full(a);
      if (a == pivot && s(pivot) == 0.0 && ga > 0.0) ga = 0.0;
      g_norm2 += ga * ga;
    }
    if (std::sqrt(g_norm2) <= opts.tol) break;
    if (res.iterations >= opts.iter_cap) {
      res.warning = true;
      break;
    }

    // Restricted inverses for the Hessian.
    Matrix E = Matrix::Zero(m, r);
    for (int a = 0; a < r; ++a) E(R[a], a) = 1.0;
    const Matrix Pinv_cols = cur->llt_P.solve(E);
    const Matrix Qinv_cols = cur->llt_Q.solve(E);
    Matrix Hmat(r, r);
    Vector g_R(r);
    for (int a = 0; a < r; ++a) {
      g_R(a) = g_full(R[a]);
      for (int c = 0; c < r; ++c) {
        const double pinv_ac = Pinv_cols(R[a], c);
        const double qinv_ac = Qinv_cols(R[a], c);
        Hmat(a, c) =
            2.0 * (ctx.lambda - 1.0) *
                (pinv_ac * uP(pivot) + uP(R[a]) * uP(R[c])) +
            2.0 * (qinv_ac * uQ(pivot) + uQ(R[a]) * uQ(R[c]));
      }
    }
    Hmat = (0.5 * (Hmat + Hmat.transpose())).eval();  // aliasing temp

    Vector d_R;
    Eigen::LLT<Matrix> h_llt(Hmat);
    if (h_llt.info() == Eigen::Success) {
      d_R = -h_llt.solve(g_R);
    } else {
      d_R = -g_R;  // steepest descent fallback
    }
    if (g_R.dot(d_R) >= 0.0) d_R = -g_R;

    // Backtracking line search; trial points outside the PD cone are
    // rejected the same way as insufficient decrease. f is a difference of
    // log-dets, so its evaluation noise is around 1e-12 of the log-det
    // magnitudes; once the predicted decrease sinks below that scale the
    // Armijo comparison is meaningless and a feasible Newton step is
    // accepted on a loose no-ascent bound instead (the iterate is then in
    // the quadratic basin, where full steps contract the gradient).
    const double noise_scale = 1e-10 * (1.0 + std::abs(cur->f));
    bool accepted = false;
    double t = 1.0;
    while (t >= 1e-20) {
      Vector s_try = s;
      for (int a = 0; a < r; ++a) s_try(R[a]) += t * d_R(a);
      if (s_try(pivot) < 0.0) s_try(pivot) = 0.0;
      const Vector step = s_try - s;
      const double slope = g_full.dot(step);
      if (slope < 0.0) {
        auto trial =
            eval_point(ctx, pivot, s_try, 2.0 * ctx.lambda * b.dot(s_try));
        if (trial) {
          const bool armijo = trial->f <= cur->f + 1e-4 * slope;
          const bool in_noise = -slope <= noise_scale &&
                                trial->f <= cur->f + noise_scale;
          if (armijo || in_noise) {
            s = s_try;
            cur = std::move(trial);
            accepted = true;
            break;
          }
        }
      }
      t *= 0.5;
    }
    ++res.iterations;
    if (!accepted) {
      res.warning = true;  // stalled above tolerance
      break;
    }
  }

  res.update.s = s;
  res.objective = cur->f;
  return res;
}

}  // namespace detail

// Best coupled update at the given pivot on top of Sigma_prev, with the
// coupling restricted to support + pivot. The solver is warm-started from
// the closed-form diagonal optimum, so its result never loses to the
// diagonal-only move at the same pivot.
inline SubproblemResult subproblem_solve(
    const ObservationModel& mod, const Matrix& Sigma_prev, int pivot,
    double lambda, const CorrelatedOptions& opts = {},
    std::optional<std::vector<int>> support = std::nullopt) {
  if (pivot < 0 || pivot >= mod.m) {
    throw validation_error("pivot index out of range");
  }
  const auto ctx = detail::make_context(mod, Sigma_prev, lambda);
  std::vector<int> sup =
      support ? std::move(*support) : nonzero_rows(Sigma_prev);
  const auto ab = alpha_beta(mod, Sigma_prev, pivot);
  const auto v0 = optimal_variance(ab.first, ab.second, mod.sigma2, lambda);
  return detail::solve_in_context(ctx, pivot, sup, opts,
                                  v0 ? std::optional<double>(*v0)
                                     : std::nullopt);
}

// Nearest PSD matrix in Frobenius norm, computed on the support only so
// that zero rows and columns stay exactly zero: negative eigenvalues of the
// support block are clipped to zero and the block is re-assembled
// symmetrically. Idempotent.
inline Matrix psd_project(const Matrix& S) {
  const double scale = std::max(1.0, max_abs(S));
  if (!is_symmetric(S, 1e-12 * scale)) {
    throw numerical_error("psd_project: input is not symmetric");
  }
  const SupportEigh eig = eigh_on_support(S);
  const int r = static_cast<int>(eig.index.size());
  if (r == 0) return Matrix::Zero(S.rows(), S.cols());
  Vector clipped = eig.eigenvalues.cwiseMax(0.0);
  Matrix block = eig.eigenvectors * clipped.asDiagonal() *
                 eig.eigenvectors.transpose();
  block = (0.5 * (block + block.transpose())).eval();  // aliasing temp
  Matrix out = Matrix::Zero(S.rows(), S.cols());
  for (int a = 0; a < r; ++a)
    for (int c = 0; c < r; ++c) out(eig.index[a], eig.index[c]) = block(a, c);
  return out;
}

// Greedy coupled construction. Each epoch solves the convex subproblem at
// every unselected pivot, applies the best strict improvement (ties toward
// the lowest index), and stops early with the shortfall flag when the best
// increment is not a real improvement. The accumulated covariance is
// PSD-projected at the end (or each epoch when requested); the projection
// touches only the selected support.
inline std::pair<AttackPlan, GreedyTrace> greedy_correlated(
    const ObservationModel& mod, int k, double lambda,
    const CorrelatedOptions& opts = {}) {
  detail::check_lambda(lambda);
  if (k < 1 || k > mod.m) {
    throw validation_error("sensor budget k must lie in [1, m]");
  }

  Matrix Sigma = Matrix::Zero(mod.m, mod.m);
  std::vector<int> support;

  GreedyTrace trace;
  trace.J_start = cost_J(mod, Sigma, lambda);
  double J = trace.J_start;

  AttackPlan plan;
  plan.lambda = lambda;
  plan.k = k;

  Eigen::LLT<Matrix> yy_llt(mod.Sigma_YY);
  if (yy_llt.info() != Eigen::Success) {
    throw numerical_error("greedy_correlated: Sigma_YY is not PD");
  }
  const Vector beta =
      yy_llt.solve(Matrix::Identity(mod.m, mod.m)).diagonal();

  for (int epoch = 1; epoch <= k; ++epoch) {
    const auto ctx = detail::make_context(mod, Sigma, lambda);
    Eigen::LLT<Matrix> p0_llt(ctx.P0);
    if (p0_llt.info() != Eigen::Success) {
      throw numerical_error("greedy_correlated: working covariance lost PD");
    }
    const Vector alpha =
        p0_llt.solve(Matrix::Identity(mod.m, mod.m)).diagonal();

    GreedyEpoch rec;
    rec.epoch = epoch;
    std::optional<SubproblemResult> best;
    std::vector<char> taken(mod.m, 0);
    for (int j : support) taken[j] = 1;
    for (int j = 0; j < mod.m; ++j) {
      if (taken[j]) continue;
      const auto v0 =
          optimal_variance(alpha(j), beta(j), mod.sigma2, lambda);
      SubproblemResult res = detail::solve_in_context(
          ctx, j, support, opts,
          v0 ? std::optional<double>(*v0) : std::nullopt);
      rec.scores.push_back({j, res.objective});
      if (!best || res.objective < best->objective) best = std::move(res);
    }
    if (!best || best->objective >= -1e-12) {
      trace.shortfall = true;
      break;
    }

    Sigma += make_delta(best->update);
    support.push_back(best->update.pivot);
    J += best->objective;
    if (opts.project_each_epoch) {
      Sigma = psd_project(Sigma);
      J = cost_J(mod, Sigma, lambda);
    }

    rec.selected_index = best->update.pivot;
    rec.v_star = 2.0 * best->update.s(best->update.pivot);
    rec.s = best->update.s;
    rec.J_after = J;
    rec.solver_iters = best->iterations;
    rec.warning = best->warning;
    trace.epochs.push_back(std::move(rec));
  }

  plan.support = support;
  plan.Sigma_AA = psd_project(Sigma);
  return {std::move(plan), std::move(trace)};
}

}  // namespace sdia
