#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when an argument violates a shape or value precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Nonnegative L x N x K motif tensor.
///
/// Storage is lag-major: slice W_l (N x K, column-major) is contiguous and
/// slices follow each other, so the whole buffer read as an N x (L*K)
/// column-major matrix is the block matrix [W_1 ... W_L]. Column p = l*K + k
/// of that view is the fiber W(l, :, k).
class MotifTensor {
 public:
  using SliceMap = Eigen::Map<Matrix>;
  using ConstSliceMap = Eigen::Map<const Matrix>;

  MotifTensor() = default;
  MotifTensor(Index lags, Index features, Index components)
      : lags_(lags), features_(features), components_(components) {
    if (lags < 0 || features < 0 || components < 0) {
      throw InvalidInput("MotifTensor: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(lags * features * components), 0.0);
  }

  static MotifTensor Zero(Index lags, Index features, Index components) {
    return MotifTensor(lags, features, components);
  }

  Index lags() const { return lags_; }
  Index features() const { return features_; }
  Index components() const { return components_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index l, Index n, Index k) { return data_[offset(l, n, k)]; }
  double operator()(Index l, Index n, Index k) const { return data_[offset(l, n, k)]; }

  /// W_l, an N x K view.
  SliceMap slice(Index l) { return SliceMap(data_.data() + l * features_ * components_, features_, components_); }
  ConstSliceMap slice(Index l) const {
    return ConstSliceMap(data_.data() + l * features_ * components_, features_, components_);
  }

  /// [W_1 ... W_L] as an N x (L*K) view.
  SliceMap unfolded() { return SliceMap(data_.data(), features_, lags_ * components_); }
  ConstSliceMap unfolded() const { return ConstSliceMap(data_.data(), features_, lags_ * components_); }

  /// Motif k as an N x L matrix (column l is W(l, :, k)).
  Matrix motif(Index k) const {
    Matrix m(features_, lags_);
    for (Index l = 0; l < lags_; ++l) m.col(l) = slice(l).col(k);
    return m;
  }

  void set_motif(Index k, const Eigen::Ref<const Matrix>& m) {
    if (m.rows() != features_ || m.cols() != lags_) throw InvalidInput("set_motif: shape mismatch");
    for (Index l = 0; l < lags_; ++l) slice(l).col(k) = m.col(l);
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double squared_norm() const { return unfolded().squaredNorm(); }
  double min_coeff() const { return size() == 0 ? 0.0 : unfolded().minCoeff(); }

  MotifTensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const MotifTensor&, const MotifTensor&) = default;

 private:
  std::size_t offset(Index l, Index n, Index k) const {
    return static_cast<std::size_t>((l * components_ + k) * features_ + n);
  }

  Index lags_ = 0;
  Index features_ = 0;
  Index components_ = 0;
  std::vector<double> data_;
};

/// Model dimensions: N features, T timebins, K components, L lags.
struct Dims {
  Index N = 0;
  Index T = 0;
  Index K = 0;
  Index L = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// A CNMF model: motifs W (L x N x K) and activations H (K x T).
struct CnmfModel {
  MotifTensor W;
  Matrix H;

  Dims dims() const { return {W.features(), H.cols(), H.rows(), W.lags()}; }

  bool nonnegative() const {
    return W.min_coeff() >= 0.0 && (H.size() == 0 || H.minCoeff() >= 0.0);
  }
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

/// Checks that W and H agree on K and that L <= T.
inline void check_factors(const MotifTensor& W, const Matrix& H) {
  require(W.components() == H.rows(), "motif tensor and activations disagree on K");
  require(W.lags() >= 1 && W.lags() <= H.cols(), "lag count must satisfy 1 <= L <= T");
}

inline void check_shapes(const Matrix& X, const MotifTensor& W, const Matrix& H) {
  check_factors(W, H);
  require(X.rows() == W.features(), "data rows must equal motif feature count");
  require(X.cols() == H.cols(), "data columns must equal activation columns");
}

/// Checks the DataMatrix invariants: at least 1x1, finite, every entry >= 0.
inline void check_data(const Matrix& X) {
  require(X.rows() >= 1 && X.cols() >= 1, "data matrix must be at least 1x1");
  require(X.allFinite(), "data matrix has non-finite entries");
  require(X.minCoeff() >= 0.0, "data matrix has negative entries");
}

}  // namespace cnmf
