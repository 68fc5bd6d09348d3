#pragma once

// Convolution operator and the equivalent ways of evaluating the CNMF
// reconstruction
//
//   Xhat = sum_l W_l * H * S_l        (l = 0 .. L-1, zero-based lags)
//
// where right-multiplication by S_l shifts columns right by l with zero fill
// and drops the last l columns (zero padding, truncated at the right edge).
// vec() stacks columns.

#include <algorithm>
#include <cmath>
#include <limits>

#include "cnmf/tensor.hpp"

namespace cnmf {

/// Raised when a materializing oracle would exceed its size cap.
class OracleTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A * S_l: columns moved right by l, zero-filled on the left.
inline Matrix shift_columns(const Eigen::Ref<const Matrix>& A, Index l) {
  require(l >= 0, "shift must be nonnegative");
  const Index T = A.cols();
  Matrix out = Matrix::Zero(A.rows(), T);
  if (l < T) out.rightCols(T - l) = A.leftCols(T - l);
  return out;
}

/// A * S_{-l}, the adjoint shift: columns moved left by l, zero-filled on the right.
inline Matrix shift_columns_left(const Eigen::Ref<const Matrix>& A, Index l) {
  require(l >= 0, "shift must be nonnegative");
  const Index T = A.cols();
  Matrix out = Matrix::Zero(A.rows(), T);
  if (l < T) out.leftCols(T - l) = A.rightCols(T - l);
  return out;
}

/// Convolves one motif (N x L, column l = lag l) with an activation row of
/// length T. Column t of the result is sum_l motif(:, l) * h(t - l).
inline Matrix conv_motif(const Eigen::Ref<const Matrix>& motif, const Eigen::Ref<const Eigen::RowVectorXd>& h) {
  const Index N = motif.rows();
  const Index L = motif.cols();
  const Index T = h.size();
  Matrix out = Matrix::Zero(N, T);
  for (Index tau = 0; tau < T; ++tau) {
    const double a = h(tau);
    if (a == 0.0) continue;
    const Index width = std::min(L, T - tau);
    out.middleCols(tau, width) += a * motif.leftCols(width);
  }
  return out;
}

/// Classical form: sum_l W_l H S_l, evaluated without forming shifted copies.
inline Matrix reconstruct(const MotifTensor& W, const Matrix& H) {
  check_factors(W, H);
  const Index T = H.cols();
  Matrix out = Matrix::Zero(W.features(), T);
  for (Index l = 0; l < W.lags(); ++l) {
    out.rightCols(T - l).noalias() += W.slice(l) * H.leftCols(T - l);
  }
  return out;
}

/// Outer-product form: sum_k conv_motif(W_::k, h_k).
inline Matrix reconstruct_outer(const MotifTensor& W, const Matrix& H) {
  check_factors(W, H);
  Matrix out = Matrix::Zero(W.features(), H.cols());
  for (Index k = 0; k < W.components(); ++k) out += conv_motif(W.motif(k), H.row(k));
  return out;
}

/// V z with V = sum_l (S_l^T kron W_l), matrix-free. z has length K*T and is
/// vec(H); the result has length N*T and is vec(Xhat).
inline Vector reconstruct_kron_matvec(const MotifTensor& W, const Eigen::Ref<const Vector>& z) {
  const Index N = W.features(), K = W.components(), L = W.lags();
  require(K > 0 && z.size() % K == 0, "kron matvec: length must be a multiple of K");
  const Index T = z.size() / K;
  require(L <= T, "kron matvec: L exceeds T");
  Eigen::Map<const Matrix> Hz(z.data(), K, T);
  Vector y = Vector::Zero(N * T);
  Eigen::Map<Matrix> Y(y.data(), N, T);
  for (Index l = 0; l < L; ++l) Y.rightCols(T - l).noalias() += W.slice(l) * Hz.leftCols(T - l);
  return y;
}

/// V^T y, matrix-free. y has length N*T; the result has length K*T.
inline Vector reconstruct_kron_rmatvec(const MotifTensor& W, const Eigen::Ref<const Vector>& y) {
  const Index N = W.features(), K = W.components(), L = W.lags();
  require(N > 0 && y.size() % N == 0, "kron rmatvec: length must be a multiple of N");
  const Index T = y.size() / N;
  require(L <= T, "kron rmatvec: L exceeds T");
  Eigen::Map<const Matrix> Y(y.data(), N, T);
  Vector z = Vector::Zero(K * T);
  Eigen::Map<Matrix> Z(z.data(), K, T);
  for (Index l = 0; l < L; ++l) Z.leftCols(T - l).noalias() += W.slice(l).transpose() * Y.rightCols(T - l);
  return z;
}

/// Default cap on N*T for the Toeplitz oracle.
inline constexpr Index kToeplitzOracleCap = 10000;

/// T x T lower-triangular Toeplitz matrix whose l-th subdiagonal is v(l).
inline Matrix toeplitz_block(const Eigen::Ref<const Vector>& v, Index T) {
  Matrix M = Matrix::Zero(T, T);
  const Index L = std::min<Index>(v.size(), T);
  for (Index l = 0; l < L; ++l) M.diagonal(-l).setConstant(v(l));
  return M;
}

/// Toeplitz form: vec(Xhat^T) = [T(w_:nk)]_{n,k} vec(H^T). Materializes the
/// full NT x KT operator, so it is only meant as a cross-check.
inline Matrix reconstruct_toeplitz(const MotifTensor& W, const Matrix& H, Index cap = kToeplitzOracleCap) {
  check_factors(W, H);
  const Index N = W.features(), K = W.components(), T = H.cols();
  if (N * T > cap) throw OracleTooLarge("toeplitz oracle too large: N*T exceeds cap");
  Matrix op = Matrix::Zero(N * T, K * T);
  for (Index n = 0; n < N; ++n) {
    for (Index k = 0; k < K; ++k) {
      Vector fiber(W.lags());
      for (Index l = 0; l < W.lags(); ++l) fiber(l) = W(l, n, k);
      op.block(n * T, k * T, T, T) = toeplitz_block(fiber, T);
    }
  }
  const Matrix Ht = H.transpose();
  const Vector vecHt = Eigen::Map<const Vector>(Ht.data(), Ht.size());
  const Vector vecXt = op * vecHt;
  // vec(Xhat^T) stacks the rows of Xhat.
  Matrix out(N, T);
  for (Index n = 0; n < N; ++n) out.row(n) = vecXt.segment(n * T, T).transpose();
  return out;
}

/// ||X - Xhat|| / ||X||.
inline double normalized_loss(const Matrix& X, const MotifTensor& W, const Matrix& H) {
  check_shapes(X, W, H);
  const double xnorm = X.norm();
  require(xnorm > 0.0, "normalized loss undefined for an all-zero data matrix");
  return (X - reconstruct(W, H)).norm() / xnorm;
}

/// E = X - reconstruct(W, H). Entries may be negative.
class Residual {
 public:
  Residual() = default;
  explicit Residual(Matrix values) : values_(std::move(values)) {}

  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }
  double squared_norm() const { return values_.squaredNorm(); }

 private:
  Matrix values_;
};

inline Residual residual_full(const Matrix& X, const MotifTensor& W, const Matrix& H) {
  check_shapes(X, W, H);
  return Residual(X - reconstruct(W, H));
}

/// Applies the change H(k, t): old_value -> new_value to a residual. Touches
/// only columns t .. min(t + L, T) - 1, O(N L) work. motif is N x L.
inline void residual_patch(Residual& R, const Eigen::Ref<const Matrix>& motif, Index t, double old_value,
                           double new_value) {
  Matrix& E = R.values();
  require(t >= 0 && t < E.cols(), "residual_patch: timebin out of range");
  const double delta = old_value - new_value;
  if (delta == 0.0) return;
  const Index width = std::min(motif.cols(), E.cols() - t);
  E.middleCols(t, width) += delta * motif.leftCols(width);
}

}  // namespace cnmf
