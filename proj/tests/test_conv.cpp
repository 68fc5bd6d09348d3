#include <gtest/gtest.h>

#include <array>
#include <tuple>

#include "cnmf/conv.hpp"
#include "cnmf/random.hpp"
#include "oracles.hpp"

using namespace cnmf;

namespace {

Matrix rows2x4() {
  Matrix A(2, 4);
  A << 1, 2, 3, 4, 5, 6, 7, 8;
  return A;
}

double max_abs(const Matrix& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Shift, RightShiftMatchesWorkedExample) {
  Matrix s1(2, 4), s2(2, 4);
  s1 << 0, 1, 2, 3, 0, 5, 6, 7;
  s2 << 0, 0, 1, 2, 0, 0, 5, 6;
  EXPECT_EQ(shift_columns(rows2x4(), 1), s1);
  EXPECT_EQ(shift_columns(rows2x4(), 2), s2);
  EXPECT_EQ(shift_columns(rows2x4(), 0), rows2x4());
}

TEST(Shift, ShiftPastEndIsZero) {
  EXPECT_EQ(shift_columns(rows2x4(), 4), Matrix::Zero(2, 4));
  EXPECT_EQ(shift_columns(rows2x4(), 9), Matrix::Zero(2, 4));
  EXPECT_EQ(shift_columns_left(rows2x4(), 7), Matrix::Zero(2, 4));
}

TEST(Shift, LeftShift) {
  Matrix a(1, 4), b(1, 4);
  a << 0, 1, 2, 3;
  b << 1, 2, 3, 0;
  EXPECT_EQ(shift_columns_left(a, 1), b);
  EXPECT_EQ(shift_columns_left(b, 0), b);
}

TEST(Shift, NegativeShiftRejected) {
  EXPECT_THROW(shift_columns(rows2x4(), -1), InvalidInput);
  EXPECT_THROW(shift_columns_left(rows2x4(), -1), InvalidInput);
}

TEST(Shift, MatchesExplicitShiftMatrices) {
  Rng rng(3);
  const Matrix A = oracle::random_matrix(3, 5, rng, -1, 1);
  for (Index l = 0; l <= 5; ++l) {
    EXPECT_EQ(shift_columns(A, l), A * oracle::shift_matrix(5, l));
    EXPECT_EQ(shift_columns_left(A, l), A * oracle::unshift_matrix(5, l));
  }
}

TEST(Shift, AdjointIdentity) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index T = 2 + trial % 7;
    const Matrix A = oracle::random_matrix(3, T, rng, -1, 1);
    const Matrix B = oracle::random_matrix(3, T, rng, -1, 1);
    for (Index l = 0; l <= T; ++l) {
      const double lhs = shift_columns(A, l).cwiseProduct(B).sum();
      const double rhs = A.cwiseProduct(shift_columns_left(B, l)).sum();
      EXPECT_NEAR(lhs, rhs, 1e-12);
    }
  }
}

TEST(ConvMotif, SingleLagIsOuterProduct) {
  Rng rng(5);
  const Matrix w = oracle::random_matrix(4, 1, rng);
  const Eigen::RowVectorXd h = oracle::random_matrix(1, 6, rng);
  EXPECT_LT(max_abs(conv_motif(w, h) - w * h), 1e-15);
}

TEST(ConvMotif, WorkedExampleWithTruncation) {
  Matrix motif(1, 2);
  motif << 1, 2;
  Eigen::RowVectorXd h(3);
  h << 1, 0, 1;
  Matrix expected(1, 3);
  expected << 1, 2, 1;
  EXPECT_EQ(conv_motif(motif, h), expected);
}

TEST(ConvMotif, ZeroActivation) {
  Matrix motif = Matrix::Ones(3, 2);
  EXPECT_EQ(conv_motif(motif, Eigen::RowVectorXd::Zero(5)), Matrix::Zero(3, 5));
}

TEST(Reconstruct, SingleComponentMatchesConvMotif) {
  Rng rng(8);
  const MotifTensor W = oracle::random_tensor(3, 4, 1, rng);
  const Matrix H = oracle::random_matrix(1, 9, rng);
  EXPECT_LT(max_abs(reconstruct(W, H) - conv_motif(W.motif(0), H.row(0))), 1e-14);
}

TEST(Reconstruct, ZeroMotifs) {
  Rng rng(1);
  EXPECT_EQ(reconstruct(MotifTensor(3, 4, 2), oracle::random_matrix(2, 8, rng)), Matrix::Zero(4, 8));
}

TEST(Reconstruct, ClassicalMatchesOuterProductForm) {
  Rng rng(2024);
  const MotifTensor W = oracle::random_tensor(3, 4, 2, rng);
  const Matrix H = oracle::random_matrix(2, 10, rng);
  EXPECT_LT(max_abs(reconstruct(W, H) - reconstruct_outer(W, H)), 1e-12);
  EXPECT_LT(max_abs(reconstruct(W, H) - oracle::brute_reconstruct(W, H)), 1e-12);
}

TEST(Reconstruct, ShapeMismatchRejected) {
  EXPECT_THROW(reconstruct(MotifTensor(2, 3, 2), Matrix::Zero(3, 5)), InvalidInput);
  EXPECT_THROW(reconstruct(MotifTensor(6, 3, 2), Matrix::Zero(2, 5)), InvalidInput);
}

TEST(KronForm, MatvecOfVecHIsVecReconstruction) {
  Rng rng(9);
  const MotifTensor W = oracle::random_tensor(3, 4, 2, rng);
  const Matrix H = oracle::random_matrix(2, 7, rng);
  const Vector v = reconstruct_kron_matvec(W, oracle::vec(H));
  EXPECT_LT((v - oracle::vec(reconstruct(W, H))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((v - oracle::explicit_kron_operator(W, 7) * oracle::vec(H)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KronForm, ZeroInputs) {
  Rng rng(4);
  const MotifTensor W = oracle::random_tensor(2, 3, 2, rng);
  EXPECT_EQ(reconstruct_kron_matvec(W, Vector::Zero(2 * 6)), Vector::Zero(3 * 6));
  EXPECT_EQ(reconstruct_kron_rmatvec(W, Vector::Zero(3 * 6)), Vector::Zero(2 * 6));
  EXPECT_EQ(reconstruct_kron_rmatvec(MotifTensor(2, 3, 2), oracle::random_matrix(18, 1, rng)), Vector::Zero(12));
}

TEST(KronForm, ScalarCaseIsScaledIdentity) {
  MotifTensor W(1, 1, 1);
  W(0, 0, 0) = 2.5;
  Vector z(4);
  z << 1, -2, 3, 0.5;
  EXPECT_EQ(reconstruct_kron_matvec(W, z), 2.5 * z);
}

TEST(KronForm, RmatvecIsExplicitTranspose) {
  Rng rng(77);
  const MotifTensor W = oracle::random_tensor(2, 2, 2, rng);
  const Matrix V = oracle::explicit_kron_operator(W, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector y = oracle::random_matrix(10, 1, rng, -1, 1);
    const Vector z = oracle::random_matrix(10, 1, rng, -1, 1);
    EXPECT_LT((reconstruct_kron_rmatvec(W, y) - V.transpose() * y).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(reconstruct_kron_matvec(W, z).dot(y), z.dot(reconstruct_kron_rmatvec(W, y)), 1e-12);
  }
}

TEST(ToeplitzForm, BlockLayout) {
  Vector v(3);
  v << 1, 2, 3;
  Matrix expected(4, 4);
  expected << 1, 0, 0, 0,
              2, 1, 0, 0,
              3, 2, 1, 0,
              0, 3, 2, 1;
  EXPECT_EQ(toeplitz_block(v, 4), expected);
}

TEST(ToeplitzForm, AgreesWithClassical) {
  Rng rng(31);
  const MotifTensor W = oracle::random_tensor(3, 2, 2, rng);
  const Matrix H = oracle::random_matrix(2, 8, rng);
  EXPECT_LT(max_abs(reconstruct_toeplitz(W, H) - reconstruct(W, H)), 1e-12);
}

TEST(ToeplitzForm, SingleLagIsNmfProduct) {
  Rng rng(32);
  const MotifTensor W = oracle::random_tensor(1, 3, 2, rng);
  const Matrix H = oracle::random_matrix(2, 6, rng);
  EXPECT_LT(max_abs(reconstruct_toeplitz(W, H) - W.slice(0) * H), 1e-14);
  EXPECT_EQ(reconstruct_toeplitz(W, Matrix::Zero(2, 6)), Matrix::Zero(3, 6));
}

TEST(ToeplitzForm, SizeCap) {
  EXPECT_THROW(reconstruct_toeplitz(MotifTensor(2, 200, 1), Matrix::Zero(1, 60)), OracleTooLarge);
  EXPECT_THROW(reconstruct_toeplitz(MotifTensor(2, 4, 1), Matrix::Zero(1, 10), 39), OracleTooLarge);
  EXPECT_NO_THROW(reconstruct_toeplitz(MotifTensor(2, 4, 1), Matrix::Zero(1, 10), 40));
}

TEST(Loss, WorkedExamples) {
  Matrix X(1, 2);
  X << 3, 4;
  MotifTensor W(1, 1, 1);
  Matrix H(1, 2);
  H << 1, 0;
  EXPECT_DOUBLE_EQ(normalized_loss(X, W, H), 1.0);
  W(0, 0, 0) = 3.0;  // Xhat = [3, 0]
  EXPECT_DOUBLE_EQ(normalized_loss(X, W, H), 0.8);
}

TEST(Loss, ExactFitIsZero) {
  Rng rng(6);
  const MotifTensor W = oracle::random_tensor(3, 4, 2, rng);
  const Matrix H = oracle::random_matrix(2, 9, rng);
  EXPECT_EQ(normalized_loss(reconstruct(W, H), W, H), 0.0);
}

TEST(Loss, ZeroDataRejected) {
  EXPECT_THROW(normalized_loss(Matrix::Zero(2, 3), MotifTensor(1, 2, 1), Matrix::Ones(1, 3)), InvalidInput);
}

TEST(Residual, FullRecompute) {
  Rng rng(12);
  const MotifTensor W = oracle::random_tensor(3, 4, 2, rng);
  const Matrix H = oracle::random_matrix(2, 10, rng);
  const Matrix X = oracle::random_matrix(4, 10, rng);
  EXPECT_EQ(residual_full(reconstruct(W, H), W, H).values(), Matrix::Zero(4, 10));
  EXPECT_EQ(residual_full(X, MotifTensor(3, 4, 2), H).values(), X);
  EXPECT_LT(max_abs(residual_full(X, W, H).values() - (X - oracle::brute_reconstruct(W, H))), 1e-12);
}

TEST(Residual, PatchMatchesRecompute) {
  Rng rng(13);
  const MotifTensor W = oracle::random_tensor(3, 4, 2, rng);
  Matrix H = oracle::random_matrix(2, 10, rng);
  const Matrix X = oracle::random_matrix(4, 10, rng);
  Residual R = residual_full(X, W, H);
  const Residual before = R;
  residual_patch(R, W.motif(1), 4, H(1, 4), H(1, 4));
  EXPECT_EQ(R.values(), before.values());

  const double updated = 0.123;
  residual_patch(R, W.motif(1), 4, H(1, 4), updated);
  H(1, 4) = updated;
  EXPECT_LT(max_abs(R.values() - residual_full(X, W, H).values()), 1e-12);
}

TEST(Residual, PatchClipsAtRightEdge) {
  Rng rng(14);
  const MotifTensor W = oracle::random_tensor(3, 4, 1, rng);
  Residual R(Matrix::Zero(4, 6));
  residual_patch(R, W.motif(0), 5, 1.0, 0.0);
  EXPECT_EQ(R.values().leftCols(5), Matrix::Zero(4, 5));
  EXPECT_LT(max_abs(R.values().col(5) - W.slice(0).col(0)), 1e-15);
}

// Property: classical, outer-product, Kronecker and Toeplitz forms agree.
class FormEquivalence : public testing::TestWithParam<std::tuple<Index, Index, Index, Index>> {};

TEST_P(FormEquivalence, AllFormsAgree) {
  const auto [L, N, K, T] = GetParam();
  Rng rng(static_cast<std::uint64_t>(L * 1000 + N * 100 + K * 10 + T));
  for (int trial = 0; trial < 10; ++trial) {
    const MotifTensor W = oracle::random_tensor(L, N, K, rng);
    const Matrix H = oracle::random_matrix(K, T, rng);
    const Matrix classical = reconstruct(W, H);
    const Vector kv = reconstruct_kron_matvec(W, oracle::vec(H));
    const Matrix kron = Eigen::Map<const Matrix>(kv.data(), N, T);
    const std::array<Matrix, 5> forms{classical, reconstruct_outer(W, H), kron, reconstruct_toeplitz(W, H),
                                      oracle::explicit_classical(W, H)};
    for (std::size_t i = 0; i < forms.size(); ++i)
      for (std::size_t j = i + 1; j < forms.size(); ++j) EXPECT_LT(max_abs(forms[i] - forms[j]), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, FormEquivalence,
                         testing::Values(std::make_tuple(1, 3, 2, 6), std::make_tuple(3, 4, 2, 10),
                                         std::make_tuple(5, 2, 3, 12)));

TEST(ReconstructProperty, Linearity) {
  Rng rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const MotifTensor W = oracle::random_tensor(4, 3, 3, rng);
    const Matrix H1 = oracle::random_matrix(3, 11, rng);
    const Matrix H2 = oracle::random_matrix(3, 11, rng);
    EXPECT_LT(max_abs(reconstruct(W, H1 + H2) - reconstruct(W, H1) - reconstruct(W, H2)), 1e-12);
  }
}

TEST(ReconstructProperty, SingleLagIsMatrixProduct) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const MotifTensor W = oracle::random_tensor(1, 5, 3, rng);
    const Matrix H = oracle::random_matrix(3, 7, rng);
    const Matrix product = W.slice(0) * H;
    EXPECT_EQ(reconstruct(W, H), product);
  }
}

TEST(ResidualProperty, PatchSequenceTracksRecompute) {
  Rng rng(42);
  const Index L = 4, N = 5, K = 3, T = 20;
  const MotifTensor W = oracle::random_tensor(L, N, K, rng);
  Matrix H = oracle::random_matrix(K, T, rng);
  const Matrix X = oracle::random_matrix(N, T, rng, 0, 3);
  Residual R = residual_full(X, W, H);
  for (int edit = 0; edit < 2000; ++edit) {
    const Index k = static_cast<Index>(rng.bits() % K);
    const Index t = static_cast<Index>(rng.bits() % T);
    const double updated = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0, 2);
    residual_patch(R, W.motif(k), t, H(k, t), updated);
    H(k, t) = updated;
  }
  const Matrix fresh = residual_full(X, W, H).values();
  EXPECT_LE((R.values() - fresh).norm(), 1e-9 * std::max(1.0, fresh.norm()));
}
