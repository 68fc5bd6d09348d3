#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cnmf/conv.hpp"
#include "cnmf/nnls.hpp"
#include "cnmf/random.hpp"
#include "cnmf/tensor.hpp"

namespace cnmf {

enum class Algorithm { MU, HALS, ANLS };
enum class StopReason { MaxIters, TimeLimit, Converged, TargetReached };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MU: return "mu";
    case Algorithm::HALS: return "hals";
    case Algorithm::ANLS: return "anls";
  }
  return "?";
}

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxIters: return "max_iters";
    case StopReason::TimeLimit: return "time_limit";
    case StopReason::Converged: return "converged";
    case StopReason::TargetReached: return "target_reached";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "mu") return Algorithm::MU;
  if (s == "hals") return Algorithm::HALS;
  if (s == "anls") return Algorithm::ANLS;
  throw InvalidInput("unknown algorithm: " + std::string(s));
}

/// l1 weights are subtracted from the numerator and l2 weights added to the
/// denominator of the HALS updates, i.e. the penalized objective is
/// 0.5 ||X - Xhat||^2 + l1 * sum(x) + 0.5 * l2 * ||x||^2 per factor.
struct Regularization {
  double l1_w = 0.0;
  double l1_h = 0.0;
  double l2_w = 0.0;
  double l2_h = 0.0;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::HALS;
  int max_iters = 100;
  double time_limit_s = std::numeric_limits<double>::infinity();
  /// Stop when the relative loss drop over the last 5 iterations falls below
  /// this. Zero disables the test.
  double rel_tol = 0.0;
  /// Stop as soon as the loss is at or below this. Zero disables the test.
  double target_loss = 0.0;
  Regularization reg;
  std::uint64_t seed = 0;
  double eps = 1e-12;
  int full_residual_refresh_every = 1;
};

inline void validate(const SolverConfig& cfg) {
  require(cfg.max_iters >= 1, "max_iters must be >= 1");
  require(cfg.time_limit_s > 0.0, "time_limit_s must be > 0");
  require(cfg.rel_tol >= 0.0, "rel_tol must be >= 0");
  require(cfg.target_loss >= 0.0, "target_loss must be >= 0");
  require(cfg.eps > 0.0, "eps must be > 0");
  require(cfg.full_residual_refresh_every >= 1, "full_residual_refresh_every must be >= 1");
  const auto& r = cfg.reg;
  require(r.l1_w >= 0.0 && r.l1_h >= 0.0 && r.l2_w >= 0.0 && r.l2_h >= 0.0,
          "regularization weights must be >= 0");
}

struct TraceRecord {
  int iteration = 0;
  double elapsed_s = 0.0;
  double loss = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct FitTrace {
  std::vector<TraceRecord> records;

  double final_loss() const { return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().loss; }

  /// Elapsed time of the first record with loss <= target, or +inf.
  double time_to_reach(double target) const {
    for (const auto& r : records)
      if (r.loss <= target) return r.elapsed_s;
    return std::numeric_limits<double>::infinity();
  }
};

struct FitResult {
  CnmfModel model;
  FitTrace trace;
  StopReason stop_reason = StopReason::MaxIters;
  /// NNLS sub-solves that ended without meeting the KKT tolerance.
  int nnls_warnings = 0;
};

/// Uniform [0, 1) factors, W drawn first (in storage order) then H
/// (column-major), from Rng(seed). Both factors are then scaled by
/// sqrt(||X|| / ||Xhat||) so the initial reconstruction has the data's norm.
inline CnmfModel init_random(Dims d, std::uint64_t seed, const Matrix& X) {
  require(d.N >= 1 && d.T >= 1 && d.K >= 1, "init_random: dimensions must be >= 1");
  require(d.L >= 1 && d.L <= d.T, "init_random: need 1 <= L <= T");
  require(X.rows() == d.N && X.cols() == d.T, "init_random: data shape mismatch");
  Rng rng(seed);
  CnmfModel m{MotifTensor(d.L, d.N, d.K), Matrix(d.K, d.T)};
  double* w = m.W.data();
  for (Index i = 0; i < m.W.size(); ++i) w[i] = rng.uniform();
  for (Index i = 0; i < m.H.size(); ++i) m.H.data()[i] = rng.uniform();
  const double xhat_norm = reconstruct(m.W, m.H).norm();
  const double xnorm = X.norm();
  if (xhat_norm > 0.0 && xnorm > 0.0) {
    const double c = std::sqrt(xnorm / xhat_norm);
    m.W *= c;
    m.H *= c;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Multiplicative updates

/// One MU iteration: every W_l from a single Xhat, then H from a refreshed Xhat.
inline void mu_step(const Matrix& X, CnmfModel& m, const SolverConfig& cfg) {
  check_shapes(X, m.W, m.H);
  const Index T = X.cols(), L = m.W.lags();
  const double eps = cfg.eps;

  Matrix xhat = reconstruct(m.W, m.H);
  for (Index l = 0; l < L; ++l) {
    const Matrix num = X.rightCols(T - l) * m.H.leftCols(T - l).transpose();
    const Matrix den = xhat.rightCols(T - l) * m.H.leftCols(T - l).transpose();
    auto Wl = m.W.slice(l);
    Wl.array() *= num.array() / (den.array() + eps);
  }

  xhat = reconstruct(m.W, m.H);
  Matrix num = Matrix::Zero(m.H.rows(), T);
  Matrix den = Matrix::Zero(m.H.rows(), T);
  for (Index l = 0; l < L; ++l) {
    num.leftCols(T - l).noalias() += m.W.slice(l).transpose() * X.rightCols(T - l);
    den.leftCols(T - l).noalias() += m.W.slice(l).transpose() * xhat.rightCols(T - l);
  }
  m.H.array() *= num.array() / (den.array() + eps);
}

// ---------------------------------------------------------------------------
// HALS

/// Column-wise HALS sweep over [W_1 ... W_L], column p = l*K + k in order.
/// The row of the stacked activations matching column p is row k of H shifted
/// right by l. R must equal X - Xhat on entry and is kept in sync.
inline void hals_update_w(const Matrix& X, CnmfModel& m, Residual& R, const Regularization& reg = {}) {
  check_shapes(X, m.W, m.H);
  const Index T = X.cols(), K = m.W.components(), L = m.W.lags();
  Matrix& E = R.values();
  Vector w_new(m.W.features());
  for (Index l = 0; l < L; ++l) {
    auto Wl = m.W.slice(l);
    for (Index k = 0; k < K; ++k) {
      const auto h = m.H.row(k).head(T - l);
      const double h2 = h.squaredNorm();
      const double denom = h2 + reg.l2_w;
      if (denom == 0.0) continue;
      auto w = Wl.col(k);
      w_new.noalias() = E.rightCols(T - l) * h.transpose();
      w_new += h2 * w;
      w_new.array() -= reg.l1_w;
      w_new = (w_new / denom).cwiseMax(0.0);
      E.rightCols(T - l).noalias() -= (w_new - w) * h;
      w = w_new;
    }
  }
}

/// Coordinate HALS sweep over H: k outer, t inner ascending. Near the right
/// edge the motif is clipped to the columns that remain in range.
inline void hals_update_h(const Matrix& X, CnmfModel& m, Residual& R, const Regularization& reg = {}) {
  check_shapes(X, m.W, m.H);
  const Index T = X.cols(), K = m.W.components(), L = m.W.lags();
  const Matrix& E = R.values();
  for (Index k = 0; k < K; ++k) {
    const Matrix motif = m.W.motif(k);
    // clipped[w] = squared norm of the first w lags of the motif
    Vector clipped = Vector::Zero(L + 1);
    for (Index l = 0; l < L; ++l) clipped(l + 1) = clipped(l) + motif.col(l).squaredNorm();
    for (Index t = 0; t < T; ++t) {
      const Index width = std::min(L, T - t);
      const double n2 = clipped(width);
      const double denom = n2 + reg.l2_h;
      if (denom == 0.0) continue;
      const double old = m.H(k, t);
      const double ip = motif.leftCols(width).cwiseProduct(E.middleCols(t, width)).sum();
      const double updated = std::max(0.0, (ip + old * n2 - reg.l1_h) / denom);
      if (updated != old) {
        residual_patch(R, motif, t, old, updated);
        m.H(k, t) = updated;
      }
    }
  }
}

inline void hals_step(const Matrix& X, CnmfModel& m, Residual& R, const Regularization& reg = {}) {
  hals_update_w(X, m, R, reg);
  hals_update_h(X, m, R, reg);
}

// ---------------------------------------------------------------------------
// ANLS

/// Stacked activations [H S_0; H S_1; ...; H S_{L-1}], (L*K) x T.
inline Matrix stacked_activations(const Matrix& H, Index L) {
  const Index K = H.rows(), T = H.cols();
  Matrix out = Matrix::Zero(L * K, T);
  for (Index l = 0; l < L; ++l) out.block(l * K, l, K, T - l) = H.leftCols(T - l);
  return out;
}

namespace detail {
inline double nnls_tolerance_for(const Vector& rhs) {
  return kNnlsTolerance * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
}
}  // namespace detail

/// Exact minimization over W: one NNLS per row of X against the shared Gram
/// matrix of the stacked activations. Returns the number of sub-solves that
/// missed the KKT tolerance.
inline int anls_update_w(const Matrix& X, CnmfModel& m) {
  check_shapes(X, m.W, m.H);
  const Index N = X.rows();
  const Matrix Hs = stacked_activations(m.H, m.W.lags());
  NormalEquations ne;
  ne.gram = Hs * Hs.transpose();
  const Matrix rhs = Hs * X.transpose();
  auto Wt = m.W.unfolded();
  int warnings = 0;
  for (Index n = 0; n < N; ++n) {
    ne.rhs = rhs.col(n);
    const NnlsSolution sol = nnls_solve(ne, Vector(Wt.row(n).transpose()), detail::nnls_tolerance_for(ne.rhs));
    if (!sol.converged) ++warnings;
    Wt.row(n) = sol.x.transpose();
  }
  return warnings;
}

/// One block coordinate pass over the columns of H, t ascending. Column t is
/// the exact NNLS minimizer with every other column fixed; its design matrix
/// is the K motifs clipped to the columns t .. t+L-1 that lie in range.
inline int anls_update_h(const Matrix& X, CnmfModel& m) {
  check_shapes(X, m.W, m.H);
  const Index T = X.cols(), K = m.W.components(), L = m.W.lags();
  Residual R = residual_full(X, m.W, m.H);
  Matrix& E = R.values();

  // grams[w] = sum_{l < w} W_l^T W_l for clip widths w = 1..L
  std::vector<Matrix> grams(static_cast<std::size_t>(L + 1), Matrix::Zero(K, K));
  for (Index l = 0; l < L; ++l) grams[l + 1] = grams[l] + m.W.slice(l).transpose() * m.W.slice(l);

  NormalEquations ne;
  Vector delta(K);
  int warnings = 0;
  for (Index t = 0; t < T; ++t) {
    const Index width = std::min(L, T - t);
    ne.gram = grams[width];
    const Vector h_old = m.H.col(t);
    ne.rhs = ne.gram * h_old;
    for (Index l = 0; l < width; ++l) ne.rhs.noalias() += m.W.slice(l).transpose() * E.col(t + l);
    const NnlsSolution sol = nnls_solve(ne, h_old, detail::nnls_tolerance_for(ne.rhs));
    if (!sol.converged) ++warnings;
    delta = sol.x - h_old;
    if (delta.squaredNorm() == 0.0) continue;
    for (Index l = 0; l < width; ++l) E.col(t + l).noalias() -= m.W.slice(l) * delta;
    m.H.col(t) = sol.x;
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Gradients of f = 0.5 ||X - Xhat||^2

/// df/dH, K x T, via the adjoint of the Kronecker operator.
inline Matrix gradient_h(const Matrix& X, const MotifTensor& W, const Matrix& H) {
  check_shapes(X, W, H);
  const Matrix E = reconstruct(W, H) - X;
  const Vector g = reconstruct_kron_rmatvec(W, Eigen::Map<const Vector>(E.data(), E.size()));
  return Eigen::Map<const Matrix>(g.data(), H.rows(), H.cols());
}

/// df/dW_l = (Xhat - X) (H S_l)^T for every lag, same layout as W.
inline MotifTensor gradient_w(const Matrix& X, const MotifTensor& W, const Matrix& H) {
  check_shapes(X, W, H);
  const Index T = X.cols();
  const Matrix E = reconstruct(W, H) - X;
  MotifTensor G(W.lags(), W.features(), W.components());
  for (Index l = 0; l < W.lags(); ++l) G.slice(l) = E.rightCols(T - l) * H.leftCols(T - l).transpose();
  return G;
}

// ---------------------------------------------------------------------------
// Driver

/// Runs the configured algorithm from a given starting model.
///
/// Record 0 holds the starting loss. Each outer iteration (W sweep, then H
/// sweep) appends one record. elapsed_s is wall-clock since the call began;
/// the time limit is checked against wall-clock minus the time spent
/// evaluating losses.
inline FitResult fit_from(const Matrix& X, CnmfModel model, const SolverConfig& cfg) {
  using clock = std::chrono::steady_clock;
  validate(cfg);
  check_data(X);
  check_shapes(X, model.W, model.H);
  const double xnorm = X.norm();
  require(xnorm > 0.0, "fit: data matrix is all zeros");

  const auto start = clock::now();
  const auto seconds_since = [&](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  double loss_time = 0.0;

  FitResult result;
  Residual R;
  const auto evaluate = [&](int iter, bool refresh) {
    const auto t0 = clock::now();
    Residual fresh = residual_full(X, model.W, model.H);
    const double loss = fresh.values().norm() / xnorm;
    if (refresh) R = std::move(fresh);
    loss_time += seconds_since(t0);
    double elapsed = seconds_since(start);
    auto& recs = result.trace.records;
    if (!recs.empty() && elapsed <= recs.back().elapsed_s) {
      elapsed = std::nextafter(recs.back().elapsed_s, std::numeric_limits<double>::infinity());
    }
    recs.push_back({iter, elapsed, loss});
  };

  evaluate(0, true);
  for (int iter = 1;; ++iter) {
    switch (cfg.algorithm) {
      case Algorithm::MU:
        mu_step(X, model, cfg);
        break;
      case Algorithm::HALS:
        hals_step(X, model, R, cfg.reg);
        break;
      case Algorithm::ANLS:
        result.nnls_warnings += anls_update_w(X, model);
        result.nnls_warnings += anls_update_h(X, model);
        break;
    }
    evaluate(iter, iter % cfg.full_residual_refresh_every == 0);

    const auto& recs = result.trace.records;
    const double loss = recs.back().loss;
    if (cfg.target_loss > 0.0 && loss <= cfg.target_loss) {
      result.stop_reason = StopReason::TargetReached;
      break;
    }
    if (cfg.rel_tol > 0.0 && iter >= 5) {
      const double before = recs[recs.size() - 6].loss;
      if (before > 0.0 && (before - loss) / before < cfg.rel_tol) {
        result.stop_reason = StopReason::Converged;
        break;
      }
    }
    if (iter >= cfg.max_iters) {
      result.stop_reason = StopReason::MaxIters;
      break;
    }
    if (seconds_since(start) - loss_time >= cfg.time_limit_s) {
      result.stop_reason = StopReason::TimeLimit;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

/// Random initialization from cfg.seed followed by fit_from.
inline FitResult fit(const Matrix& X, Index K, Index L, const SolverConfig& cfg) {
  validate(cfg);
  check_data(X);
  return fit_from(X, init_random({X.rows(), X.cols(), K, L}, cfg.seed, X), cfg);
}

}  // namespace cnmf
