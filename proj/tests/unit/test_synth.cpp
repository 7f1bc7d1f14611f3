#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "grace/synth/dgp.hpp"

namespace grace::synth {
namespace {

TEST(Synth, GarchRecursionHolds) {
  const auto ds = generate(DgpSpec::standard(6, 300, 3));
  const auto& sp = ds.spec;
  for (Index i = 0; i < 6; ++i)
    for (Index t = 0; t + 1 < 300; ++t) {
      const double eps = ds.prices.returns(i, t) - sp.mean(i) - sp.signal.amplitude * ds.group(i, t) -
                         sp.loadings.row(i).dot(ds.factors.values.col(t));
      const double expect = sp.omega(i) + sp.a(i) * eps * eps + sp.b(i) * ds.garch_h(i, t);
      EXPECT_NEAR(ds.garch_h(i, t + 1), expect, 1e-12 * expect);
    }
}

TEST(Synth, NormalInnovationMoments) {
  const auto m = mixture_moments({1.0}, {0.0}, {1.0});
  EXPECT_DOUBLE_EQ(m.skewness, 0.0);
  EXPECT_DOUBLE_EQ(m.kurtosis, 3.0);
  const auto ds = generate(DgpSpec::standard(4, 100, 1));
  EXPECT_NEAR(ds.s.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR((ds.k.array() - 3).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(Synth, SameSeedSameBytes) {
  const auto a = generate(DgpSpec::standard(5, 200, 11));
  const auto b = generate(DgpSpec::standard(5, 200, 11));
  const auto c = generate(DgpSpec::standard(5, 200, 12));
  EXPECT_EQ(std::memcmp(a.prices.returns.data(), b.prices.returns.data(), sizeof(double) * 1000), 0);
  EXPECT_NE(a.prices.returns, c.prices.returns);
}

TEST(Synth, MedianEqualsMeanForSymmetricLaw) {
  const auto ds = generate(DgpSpec::standard(3, 50, 2));
  for (Index t = 20; t < 50; ++t) {
    EXPECT_NEAR(ds.true_quantile(1, t, 0.5), ds.mu(1, t), 1e-12);
    EXPECT_NEAR(ds.true_cdf(1, t, ds.true_quantile(1, t, 0.9)), 0.9, 1e-9);
  }
}

// Two unit normals at -1 and +1: variance 2, fourth moment 1 + 6 + 3.
TEST(Mixture, SymmetricBimodalClosedForm) {
  const auto m = mixture_moments({0.5, 0.5}, {-1, 1}, {1, 1});
  EXPECT_NEAR(m.skewness, 0.0, 1e-15);
  EXPECT_NEAR(m.kurtosis, 10.0 / 4.0, 1e-14);
}

TEST(Mixture, MonteCarloAgrees) {
  const std::vector<double> w{0.85, 0.15}, mu{0.2, -1.5}, sd{0.8, 2.0};
  const auto m = mixture_moments(w, mu, sd);
  std::mt19937_64 rng(9);
  std::bernoulli_distribution pick(0.15);
  std::normal_distribution<double> z;
  const int n = 400000;
  std::vector<double> x(n);
  double mean = 0;
  for (double& v : x) {
    const int c = pick(rng);
    v = mu[c] + sd[c] * z(rng);
    mean += v / n;
  }
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d / n;
    m3 += d * d * d / n;
    m4 += d * d * d * d / n;
  }
  EXPECT_NEAR(m.skewness, m3 / std::pow(m2, 1.5), 0.05);
  EXPECT_NEAR(m.kurtosis, m4 / (m2 * m2), 0.25);
  Innovation law{w, mu, sd};
  for (double tau : {0.01, 0.3, 0.5, 0.97})
    EXPECT_NEAR(innovation_cdf(law, innovation_quantile(law, tau)), tau, 1e-10);
}

TEST(Mixture, InvalidLawRejected) {
  Innovation bad{{0.5, 0.4}, {0, 0}, {1, 1}};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Signal, TrendFollowsTrailingMean) {
  auto spec = DgpSpec::standard(4, 120, 7, MeanSignal::Kind::trend);
  const auto ds = generate(spec);
  const Index w = spec.signal.window;
  for (Index i = 0; i < 4; ++i)
    for (Index t = 0; t < 120; ++t) {
      if (t < w) {
        EXPECT_EQ(ds.group(i, t), 0.0);
        continue;
      }
      const double avg = ds.prices.returns.row(i).segment(t - w, w).mean();
      EXPECT_EQ(ds.group(i, t), avg > 0 ? 1.0 : -1.0);
      EXPECT_NEAR(ds.mu(i, t) - spec.mean(i) - spec.loadings.row(i).dot(spec.factor_mean),
                  spec.signal.amplitude * ds.group(i, t), 1e-18);
    }
}

// The magnitude signal splits days roughly in half.
TEST(Signal, MagnitudeIsBalanced) {
  const auto ds = generate(DgpSpec::standard(10, 2000, 4, MeanSignal::Kind::magnitude));
  const double up = (ds.group.rightCols(1990).array() > 0).cast<double>().mean();
  EXPECT_GT(up, 0.4);
  EXPECT_LT(up, 0.6);
  const auto none = generate(DgpSpec::standard(3, 50, 4, MeanSignal::Kind::none));
  EXPECT_EQ(none.group.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace grace::synth
