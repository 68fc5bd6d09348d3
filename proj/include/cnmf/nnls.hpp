#pragma once

// Nonnegative least squares on normal equations:
//
//   minimize 0.5 x^T G x - b^T x   subject to x >= 0
//
// with G = A^T A and b = A^T y precomputed by the caller, so one Gram matrix
// can serve many right-hand sides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cnmf/tensor.hpp"

namespace cnmf {

struct NormalEquations {
  Matrix gram;
  Vector rhs;

  Index size() const { return rhs.size(); }
};

struct NnlsSolution {
  Vector x;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kNnlsTolerance = 1e-8;

inline double nnls_objective(const NormalEquations& ne, const Vector& x) {
  return 0.5 * x.dot(ne.gram * x) - ne.rhs.dot(x);
}

/// max_i |min(x_i, (G x - b)_i)|
inline double kkt_residual(const NormalEquations& ne, const Vector& x) {
  const Vector g = ne.gram * x - ne.rhs;
  double r = 0.0;
  for (Index i = 0; i < x.size(); ++i) r = std::max(r, std::abs(std::min(x(i), g(i))));
  return r;
}

inline void check_normal_equations(const NormalEquations& ne) {
  const Index M = ne.size();
  require(M >= 1, "nnls: need at least one variable");
  require(ne.gram.rows() == M && ne.gram.cols() == M, "nnls: gram must be M x M");
  require(ne.gram.allFinite() && ne.rhs.allFinite(), "nnls: non-finite input");
}

namespace detail {

// Solves G_FF x_F = b_F. Falls back to a ridge-regularized LDLT when the
// passive block is numerically singular.
inline Vector solve_passive(const NormalEquations& ne, const std::vector<Index>& passive) {
  const Index p = static_cast<Index>(passive.size());
  Matrix G(p, p);
  Vector b(p);
  for (Index i = 0; i < p; ++i) {
    b(i) = ne.rhs(passive[i]);
    for (Index j = 0; j < p; ++j) G(i, j) = ne.gram(passive[i], passive[j]);
  }
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) {
    Vector x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  const Index M = ne.size();
  double jitter = 1e-12 * ne.gram.trace() / static_cast<double>(M);
  if (!(jitter > 0.0)) jitter = 1e-12;
  G.diagonal().array() += jitter;
  Vector x = G.ldlt().solve(b);
  if (!x.allFinite()) x = G.completeOrthogonalDecomposition().solve(b);
  return x;
}

// Lawson-Hanson active-set method on the normal equations, started from
// zero. Variables enter the passive set one at a time by largest negative
// gradient, so the passive columns stay independent and the passive solves
// are well posed even when gram is singular.
inline Vector active_set_solve(const NormalEquations& ne, double grad_tol) {
  const Index M = ne.size();
  Vector x = Vector::Zero(M);
  std::vector<char> in_passive(static_cast<std::size_t>(M), 0);
  std::vector<Index> passive;
  const int max_outer = static_cast<int>(3 * M + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = ne.rhs - ne.gram * x;
    Index enter = -1;
    double best = grad_tol;
    for (Index i = 0; i < M; ++i) {
      if (!in_passive[i] && w(i) > best) {
        best = w(i);
        enter = i;
      }
    }
    if (enter < 0) break;
    in_passive[enter] = 1;
    for (int inner = 0; inner <= M; ++inner) {
      passive.clear();
      for (Index i = 0; i < M; ++i)
        if (in_passive[i]) passive.push_back(i);
      if (passive.empty()) break;
      const Vector z = solve_passive(ne, passive);
      double alpha = 1.0;
      Index leave = -1;
      for (std::size_t i = 0; i < passive.size(); ++i) {
        const Index j = passive[i];
        if (z(static_cast<Index>(i)) <= 0.0) {
          const double a = x(j) / (x(j) - z(static_cast<Index>(i)));
          if (a < alpha) {
            alpha = a;
            leave = j;
          }
        }
      }
      if (leave < 0) {
        for (std::size_t i = 0; i < passive.size(); ++i) x(passive[i]) = z(static_cast<Index>(i));
        break;
      }
      for (std::size_t i = 0; i < passive.size(); ++i) {
        const Index j = passive[i];
        x(j) += alpha * (z(static_cast<Index>(i)) - x(j));
      }
      x(leave) = 0.0;
      in_passive[leave] = 0;
      for (Index j : passive) {
        if (in_passive[j] && x(j) <= 0.0) {
          x(j) = 0.0;
          in_passive[j] = 0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

}  // namespace detail

struct BppOptions {
  double tol = kNnlsTolerance;
  /// Pivot iteration cap; 0 means 5 M + 10.
  int max_iter = 0;
};

/// Block principal pivoting.
///
/// Variables are split into a passive set F (free, solved from G_FF x_F = b_F)
/// and an active set (held at zero). Each sweep collects the infeasible
/// variables, negative x on F or negative gradient off F, and flips all of
/// them. If the infeasible count fails to drop for 3 consecutive sweeps, only
/// the largest infeasible index is flipped until the count improves again.
/// If the pivot cap is reached first, an active-set phase finishes the solve.
inline NnlsSolution nnls_bpp(const NormalEquations& ne, const std::optional<Vector>& x0 = std::nullopt,
                             const BppOptions& opts = {}) {
  check_normal_equations(ne);
  const Index M = ne.size();
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(5 * M + 10);

  std::vector<char> in_passive(static_cast<std::size_t>(M), 0);
  if (x0) {
    require(x0->size() == M, "nnls_bpp: warm start has wrong length");
    for (Index i = 0; i < M; ++i) in_passive[i] = (*x0)(i) > 0.0;
  }

  const double grad_tol = 1e-13 * std::max(1.0, ne.rhs.lpNorm<Eigen::Infinity>());
  Index best_count = M + 1;
  int backups_left = 3;

  NnlsSolution sol;
  sol.x = Vector::Zero(M);
  std::vector<Index> passive;
  std::vector<Index> infeasible;
  for (int iter = 0;; ++iter) {
    passive.clear();
    for (Index i = 0; i < M; ++i)
      if (in_passive[i]) passive.push_back(i);

    sol.x.setZero();
    if (!passive.empty()) {
      const Vector xf = detail::solve_passive(ne, passive);
      for (std::size_t i = 0; i < passive.size(); ++i) sol.x(passive[i]) = xf(static_cast<Index>(i));
    }
    const Vector grad = ne.gram * sol.x - ne.rhs;
    const double x_tol = 1e-13 * std::max(1.0, sol.x.lpNorm<Eigen::Infinity>());

    infeasible.clear();
    for (Index i = 0; i < M; ++i) {
      if (in_passive[i] ? sol.x(i) < -x_tol : grad(i) < -grad_tol) infeasible.push_back(i);
    }
    sol.iterations = iter;
    if (infeasible.empty() || iter >= max_iter) break;

    const Index count = static_cast<Index>(infeasible.size());
    if (count < best_count) {
      best_count = count;
      backups_left = 3;
      for (Index i : infeasible) in_passive[i] = !in_passive[i];
    } else if (backups_left > 0) {
      --backups_left;
      for (Index i : infeasible) in_passive[i] = !in_passive[i];
    } else {
      const Index i = infeasible.back();
      in_passive[i] = !in_passive[i];
    }
  }

  sol.x = sol.x.cwiseMax(0.0);
  sol.kkt_residual = kkt_residual(ne, sol.x);
  if (!infeasible.empty()) {
    // Exchanges can cycle when gram is singular; finish with single-variable
    // active-set steps, which terminate on any PSD gram.
    const Vector y = detail::active_set_solve(ne, grad_tol);
    const double r = kkt_residual(ne, y);
    if (r < sol.kkt_residual || nnls_objective(ne, y) < nnls_objective(ne, sol.x)) {
      sol.x = y;
      sol.kkt_residual = r;
    }
  }
  sol.converged = sol.kkt_residual <= opts.tol;
  return sol;
}

namespace detail {

// Upper estimate of the largest eigenvalue of a PSD matrix: a power-method
// estimate inflated by 10%, never above the Gershgorin bound.
inline double lipschitz_estimate(const Matrix& G, int iterations = 50) {
  const Index M = G.rows();
  const double gershgorin = G.cwiseAbs().rowwise().sum().maxCoeff();
  if (gershgorin == 0.0) return 0.0;
  Vector v = Vector::Ones(M) / std::sqrt(static_cast<double>(M));
  double est = 0.0;
  for (int i = 0; i < iterations; ++i) {
    Vector w = G * v;
    const double nrm = w.norm();
    if (nrm == 0.0) break;
    est = v.dot(w);
    v = w / nrm;
  }
  return std::min(gershgorin, 1.1 * est > 0.0 ? 1.1 * est : gershgorin);
}

}  // namespace detail

/// Projected gradient with fixed step 1 / lambda_max(G). Returns the best
/// iterate seen; converged is false when the budget runs out first.
inline NnlsSolution nnls_projgrad(const NormalEquations& ne, const std::optional<Vector>& x0 = std::nullopt,
                                  int max_iter = 10000, double tol = kNnlsTolerance) {
  check_normal_equations(ne);
  const Index M = ne.size();
  NnlsSolution sol;
  sol.x = x0 ? Vector(x0->cwiseMax(0.0)) : Vector(Vector::Zero(M));
  require(sol.x.size() == M, "nnls_projgrad: warm start has wrong length");
  sol.kkt_residual = kkt_residual(ne, sol.x);
  sol.iterations = 0;
  if (sol.kkt_residual <= tol) {
    sol.converged = true;
    return sol;
  }
  const double lipschitz = detail::lipschitz_estimate(ne.gram);
  if (lipschitz == 0.0) return sol;
  const double step = 1.0 / lipschitz;

  Vector x = sol.x;
  double best_obj = nnls_objective(ne, x);
  for (int iter = 1; iter <= max_iter; ++iter) {
    x = (x - step * (ne.gram * x - ne.rhs)).cwiseMax(0.0);
    const double kkt = kkt_residual(ne, x);
    const double obj = nnls_objective(ne, x);
    if (obj <= best_obj) {
      best_obj = obj;
      sol.x = x;
      sol.kkt_residual = kkt;
      sol.iterations = iter;
    }
    if (kkt <= tol) {
      sol.x = x;
      sol.kkt_residual = kkt;
      sol.iterations = iter;
      sol.converged = true;
      return sol;
    }
  }
  return sol;
}

/// Exhaustive active-set search: tries all 2^M passive sets and keeps the
/// feasible KKT point with the least objective. Intended for checking the
/// other solvers on small problems.
inline NnlsSolution nnls_oracle_enumerate(const NormalEquations& ne, Index max_vars = 12) {
  check_normal_equations(ne);
  const Index M = ne.size();
  require(M <= max_vars, "nnls_oracle_enumerate: too many variables for enumeration");

  const double scale = std::max({1.0, ne.rhs.lpNorm<Eigen::Infinity>(), ne.gram.lpNorm<Eigen::Infinity>()});
  const double feas_tol = 1e-9 * scale;

  NnlsSolution best;
  best.x = Vector::Zero(M);
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<Index> passive;
  const std::uint64_t patterns = std::uint64_t{1} << M;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    passive.clear();
    for (Index i = 0; i < M; ++i)
      if (mask & (std::uint64_t{1} << i)) passive.push_back(i);
    Vector x = Vector::Zero(M);
    if (!passive.empty()) {
      const Index p = static_cast<Index>(passive.size());
      Matrix G(p, p);
      Vector b(p);
      for (Index i = 0; i < p; ++i) {
        b(i) = ne.rhs(passive[i]);
        for (Index j = 0; j < p; ++j) G(i, j) = ne.gram(passive[i], passive[j]);
      }
      const Vector xf = G.completeOrthogonalDecomposition().solve(b);
      if (!xf.allFinite() || (G * xf - b).lpNorm<Eigen::Infinity>() > feas_tol) continue;
      for (Index i = 0; i < p; ++i) x(passive[i]) = xf(i);
    }
    if (x.minCoeff() < -feas_tol) continue;
    x = x.cwiseMax(0.0);
    const Vector g = ne.gram * x - ne.rhs;
    bool kkt = true;
    for (Index i = 0; i < M && kkt; ++i)
      if (x(i) == 0.0 && g(i) < -feas_tol) kkt = false;
    if (!kkt) continue;
    const double obj = nnls_objective(ne, x);
    if (obj < best_obj) {
      best_obj = obj;
      best.x = x;
      found = true;
    }
  }
  best.kkt_residual = kkt_residual(ne, best.x);
  best.iterations = static_cast<int>(patterns);
  best.converged = found;
  return best;
}

/// BPP with a projected-gradient fallback when pivoting does not converge.
inline NnlsSolution nnls_solve(const NormalEquations& ne, const std::optional<Vector>& x0, double tol) {
  NnlsSolution sol = nnls_bpp(ne, x0, {tol, 0});
  if (sol.converged) return sol;
  NnlsSolution pg = nnls_projgrad(ne, sol.x, 5000, tol);
  if (pg.converged || nnls_objective(ne, pg.x) < nnls_objective(ne, sol.x)) return pg;
  return sol;
}

}  // namespace cnmf
