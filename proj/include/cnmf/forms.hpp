#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cnmf/conv.hpp"
#include "cnmf/random.hpp"

namespace cnmf {

struct FormCheckReport {
  int trials = 0;
  double max_form_deviation = 0.0;     ///< pairwise, over classical/outer/kron/toeplitz
  double max_adjoint_deviation = 0.0;  ///< |<Vz, y> - <z, V^T y>|
  double max_nmf_deviation = 0.0;      ///< L = 1 only: classical vs W_1 H
  bool nmf_checked = false;

  double max_deviation() const { return std::max({max_form_deviation, max_adjoint_deviation, max_nmf_deviation}); }
};

/// Random nonnegative factors with uniform [0, 1) entries.
inline CnmfModel random_model(Dims d, Rng& rng) {
  CnmfModel m{MotifTensor(d.L, d.N, d.K), Matrix(d.K, d.T)};
  for (Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = rng.uniform();
  for (Index i = 0; i < m.H.size(); ++i) m.H.data()[i] = rng.uniform();
  return m;
}

/// Evaluates every reconstruction form on random instances of the given
/// shape and records the worst disagreement.
inline FormCheckReport check_forms(Dims d, int trials, std::uint64_t seed) {
  require(trials >= 1, "check_forms: trials must be >= 1");
  require(d.N >= 1 && d.K >= 1 && d.L >= 1 && d.L <= d.T, "check_forms: need positive dims and L <= T");
  Rng rng(seed);
  FormCheckReport rep;
  rep.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    const CnmfModel m = random_model(d, rng);
    const Matrix classical = reconstruct(m.W, m.H);
    const Matrix outer = reconstruct_outer(m.W, m.H);
    const Vector kv = reconstruct_kron_matvec(m.W, Eigen::Map<const Vector>(m.H.data(), m.H.size()));
    const Matrix kron = Eigen::Map<const Matrix>(kv.data(), d.N, d.T);
    const Matrix toeplitz = reconstruct_toeplitz(m.W, m.H);
    const Matrix* forms[] = {&classical, &outer, &kron, &toeplitz};
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        rep.max_form_deviation = std::max(rep.max_form_deviation, (*forms[i] - *forms[j]).cwiseAbs().maxCoeff());

    Vector z(d.K * d.T), y(d.N * d.T);
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.uniform(-1.0, 1.0);
    for (Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(-1.0, 1.0);
    const double lhs = reconstruct_kron_matvec(m.W, z).dot(y);
    const double rhs = z.dot(reconstruct_kron_rmatvec(m.W, y));
    rep.max_adjoint_deviation = std::max(rep.max_adjoint_deviation, std::abs(lhs - rhs));

    if (d.L == 1) {
      rep.nmf_checked = true;
      const Matrix product = m.W.slice(0) * m.H;
      rep.max_nmf_deviation = std::max(rep.max_nmf_deviation, (classical - product).cwiseAbs().maxCoeff());
    }
  }
  return rep;
}

}  // namespace cnmf
