#include <gtest/gtest.h>

#include <cmath>

#include "cnmf/synth.hpp"

using namespace cnmf;

TEST(Synth, DefaultsMatchReferenceDimensions) {
  const SynthParams p;
  EXPECT_EQ(p.N, 250);
  EXPECT_EQ(p.L, 20);
  EXPECT_EQ(p.K, 5);
  EXPECT_EQ(p.sigma, 0.2);
  EXPECT_EQ(p.dirichlet_alpha, 0.1);
  EXPECT_EQ(p.zero_prob, 0.1);
  EXPECT_EQ(p.exp_rate, 1.0);
  EXPECT_EQ(p.noise_std, 1.0);
}

TEST(Synth, NoiselessDataIsCleanReconstruction) {
  const SynthDataset d = synth_generate({.N = 12, .T = 50, .K = 3, .L = 6, .noise_std = 0.0, .seed = 1});
  EXPECT_EQ(d.X, d.X_clean);
  EXPECT_LT((d.X_clean - reconstruct(d.W_true, d.H_true)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synth, NoisyDataIsNonnegative) {
  const SynthDataset d = synth_generate({.N = 12, .T = 50, .K = 3, .L = 6, .noise_std = 2.0, .seed = 2});
  EXPECT_GE(d.X.minCoeff(), 0.0);
  EXPECT_GT((d.X - d.X_clean).norm(), 0.0);
}

TEST(Synth, DeterministicAndNoiseIndependent) {
  const SynthParams p{.N = 10, .T = 40, .K = 3, .L = 5, .seed = 9};
  const SynthDataset a = synth_generate(p);
  const SynthDataset b = synth_generate(p);
  EXPECT_EQ(a.X, b.X);
  EXPECT_TRUE(a.W_true == b.W_true);
  EXPECT_EQ(a.H_true, b.H_true);

  SynthParams quiet = p;
  quiet.noise_std = 0.0;
  const SynthDataset c = synth_generate(quiet);
  EXPECT_TRUE(a.W_true == c.W_true);
  EXPECT_EQ(a.H_true, c.H_true);

  SynthParams other = p;
  other.seed = 10;
  EXPECT_FALSE(synth_generate(other).H_true == a.H_true);
}

TEST(Synth, LoadingsSumToOne) {
  const SynthDataset d = synth_generate({.N = 200, .T = 30, .K = 5, .L = 5, .seed = 3});
  for (Index n = 0; n < 200; ++n) EXPECT_NEAR(d.loadings.row(n).sum(), 1.0, 1e-12);
  EXPECT_GE(d.loadings.minCoeff(), 0.0);
}

TEST(Synth, FibersPeakAtBumpCenter) {
  const Index L = 20;
  const SynthDataset d = synth_generate({.N = 60, .T = 40, .K = 4, .L = L, .seed = 4});
  int checked = 0;
  for (Index n = 0; n < 60; ++n) {
    for (Index k = 0; k < 4; ++k) {
      if (d.loadings(n, k) < 1e-200) continue;
      const double mu = d.centers(n, k);
      // Skip centres sitting on a grid midpoint, where rounding is a tie.
      const double pos = L * (mu + 1.0) / 2.0;
      if (std::abs(pos - std::floor(pos) - 0.5) < 1e-6) continue;
      const Index expected = std::clamp<Index>(std::llround(pos), 1, L);
      Index argmax = 0;
      for (Index l = 1; l < L; ++l)
        if (d.W_true(l, n, k) > d.W_true(argmax, n, k)) argmax = l;
      EXPECT_EQ(argmax + 1, expected) << "n=" << n << " k=" << k << " mu=" << mu;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Synth, ActivationStatistics) {
  const SynthDataset d = synth_generate({.N = 1, .T = 50000, .K = 5, .L = 1, .noise_std = 0.0, .seed = 5});
  const double total = static_cast<double>(d.H_true.size());
  const double zeros = static_cast<double>((d.H_true.array() == 0.0).count());
  EXPECT_GE(zeros / total, 0.09);
  EXPECT_LE(zeros / total, 0.11);

  double sum = 0.0, sum2 = 0.0, count = 0.0;
  for (Index i = 0; i < d.H_true.size(); ++i) {
    const double v = d.H_true.data()[i];
    if (v == 0.0) continue;
    sum += v;
    sum2 += v * v;
    count += 1.0;
  }
  const double mean = sum / count;
  const double se = std::sqrt((sum2 / count - mean * mean) / count);
  EXPECT_LE(std::abs(mean - 1.0), 3.0 * se);
}

TEST(Synth, RejectsInvalidParams) {
  EXPECT_THROW(synth_generate({.N = 0}), InvalidInput);
  EXPECT_THROW(synth_generate({.T = 5, .L = 6}), InvalidInput);
  EXPECT_THROW(synth_generate({.zero_prob = 1.5}), InvalidInput);
  EXPECT_THROW(synth_generate({.noise_std = -1.0}), InvalidInput);
  EXPECT_THROW(synth_generate({.sigma = 0.0}), InvalidInput);
}
