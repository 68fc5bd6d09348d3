#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cnmf/conv.hpp"
#include "cnmf/random.hpp"
#include "cnmf/tensor.hpp"

namespace cnmf {

struct SynthParams {
  Index N = 250;
  Index T = 500;
  Index K = 5;
  Index L = 20;
  double sigma = 0.2;            ///< width of each Gaussian bump
  double dirichlet_alpha = 0.1;  ///< concentration of per-feature loadings
  double zero_prob = 0.1;        ///< probability an activation is exactly zero
  double exp_rate = 1.0;         ///< rate of the nonzero activations
  double noise_std = 1.0;        ///< 0 gives noiseless data
  std::uint64_t seed = 0;
};

struct SynthDataset {
  Matrix X;
  MotifTensor W_true;
  Matrix H_true;
  Matrix X_clean;
  /// Bump centers mu(n, k) in [-1, 1).
  Matrix centers;
  /// Dirichlet loadings alpha(n, k); each row sums to 1.
  Matrix loadings;
};

inline void validate(const SynthParams& p) {
  require(p.N >= 1 && p.T >= 1 && p.K >= 1 && p.L >= 1, "synth: dimensions must be >= 1");
  require(p.L <= p.T, "synth: need L <= T");
  require(p.sigma > 0.0, "synth: sigma must be > 0");
  require(p.dirichlet_alpha > 0.0, "synth: dirichlet_alpha must be > 0");
  require(p.zero_prob >= 0.0 && p.zero_prob <= 1.0, "synth: zero_prob must lie in [0, 1]");
  require(p.exp_rate > 0.0, "synth: exp_rate must be > 0");
  require(p.noise_std >= 0.0, "synth: noise_std must be >= 0");
}

inline double gaussian_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Draws a dataset from the CNMF generative model with Gaussian-bump motifs.
///
/// Fiber W(:, n, k) samples a Gaussian pdf centred at mu(n, k) ~ U(-1, 1) on
/// the grid 2l/L - 1, l = 1..L, scaled by a symmetric Dirichlet loading.
/// Activations are zero with probability zero_prob and Exponential(exp_rate)
/// otherwise. X = max(0, X_clean + noise). Each ingredient has its own
/// substream of the seed, so changing noise_std leaves W and H untouched.
inline SynthDataset synth_generate(const SynthParams& p) {
  validate(p);
  enum Stream : std::uint64_t { kCenters = 0, kLoadings = 1, kMask = 2, kValues = 3, kNoise = 4 };
  Rng centers_rng = Rng::substream(p.seed, kCenters);
  Rng loadings_rng = Rng::substream(p.seed, kLoadings);
  Rng mask_rng = Rng::substream(p.seed, kMask);
  Rng values_rng = Rng::substream(p.seed, kValues);
  Rng noise_rng = Rng::substream(p.seed, kNoise);

  SynthDataset d;
  d.centers.resize(p.N, p.K);
  for (Index n = 0; n < p.N; ++n)
    for (Index k = 0; k < p.K; ++k) d.centers(n, k) = centers_rng.uniform(-1.0, 1.0);

  d.loadings.resize(p.N, p.K);
  for (Index n = 0; n < p.N; ++n) {
    double total = 0.0;
    while (!(total > 0.0)) {
      for (Index k = 0; k < p.K; ++k) d.loadings(n, k) = loadings_rng.gamma(p.dirichlet_alpha);
      total = d.loadings.row(n).sum();
    }
    d.loadings.row(n) /= total;
  }

  d.W_true = MotifTensor(p.L, p.N, p.K);
  for (Index l = 0; l < p.L; ++l) {
    const double x = 2.0 * static_cast<double>(l + 1) / static_cast<double>(p.L) - 1.0;
    for (Index n = 0; n < p.N; ++n)
      for (Index k = 0; k < p.K; ++k) d.W_true(l, n, k) = d.loadings(n, k) * gaussian_pdf(x, d.centers(n, k), p.sigma);
  }

  d.H_true.resize(p.K, p.T);
  for (Index t = 0; t < p.T; ++t) {
    for (Index k = 0; k < p.K; ++k) {
      const bool zero = mask_rng.bernoulli(p.zero_prob);
      const double value = values_rng.exponential(p.exp_rate);
      d.H_true(k, t) = zero ? 0.0 : value;
    }
  }

  d.X_clean = reconstruct(d.W_true, d.H_true);
  d.X = d.X_clean;
  if (p.noise_std > 0.0) {
    for (Index t = 0; t < p.T; ++t)
      for (Index n = 0; n < p.N; ++n) d.X(n, t) = std::max(0.0, d.X(n, t) + p.noise_std * noise_rng.normal());
  }
  return d;
}

}  // namespace cnmf
