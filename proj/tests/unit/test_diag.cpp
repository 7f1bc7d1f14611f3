#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "grace/core/special_functions.hpp"
#include "grace/diag/coverage.hpp"
#include "grace/diag/moment_tests.hpp"

namespace grace::diag {
namespace {

std::vector<int> with_hits(int total, int hits) {
  std::vector<int> v(total, 0);
  // Spread evenly so the independence part stays small.
  for (int h = 0; h < hits; ++h) v[static_cast<std::size_t>(h * total / hits)] = 1;
  return v;
}

TEST(Kupiec, ExactRateGivesZero) {
  const auto r = lr_uc(with_hits(100, 10), 0.1);
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_TRUE(r.accept(0.99));
}

// Pinned from a direct evaluation of the likelihood ratio.
TEST(Kupiec, MildOverViolation) {
  const auto r = lr_uc(with_hits(250, 10), 0.05);
  EXPECT_NEAR(r.statistic, 0.5633529100175991, 1e-10);
  EXPECT_NEAR(r.p_value, 0.4529124499351952, 1e-10);
  EXPECT_LT(r.statistic, 3.841);
}

TEST(Kupiec, NoViolationsAtMedianRejects) {
  const auto r = lr_uc(std::vector<int>(100, 0), 0.5);
  EXPECT_GT(r.statistic, 100);
  EXPECT_FALSE(r.accept(0.01));
  EXPECT_TRUE(r.accept(0.0));
}

TEST(Christoffersen, BalancedSeriesNearZero) {
  // 0,1 alternating pairs: 0011 repeated gives pi01 = pi11 = 0.5.
  std::vector<int> v;
  for (int k = 0; k < 50; ++k) v.insert(v.end(), {0, 0, 1, 1});
  EXPECT_NEAR(lr_ind(v).statistic, 0.0, 0.05);
  EXPECT_NEAR(lr_cc(v, 0.5).statistic, lr_uc(v, 0.5).statistic + lr_ind(v).statistic, 1e-12);
  EXPECT_EQ(lr_cc(v, 0.5).dof, 2);
}

TEST(Christoffersen, ClusteredViolationsReject) {
  std::vector<int> v(100, 0);
  std::fill(v.begin(), v.begin() + 50, 1);
  EXPECT_GT(lr_ind(v).statistic, 50);
  EXPECT_FALSE(lr_cc(v, 0.5).accept(0.01));
}

TEST(Coverage, ShortSeriesRejected) {
  EXPECT_THROW(lr_uc(std::vector<int>(10, 0), 0.5), Error);
}

// Monte Carlo size under the null. Reference sizes from 200000 independent
// replications: LR_uc 0.053 / 0.053, LR_cc 0.040 / 0.050 at tau 0.05 / 0.5.
TEST(Coverage, SizeAtFivePercent) {
  std::mt19937_64 rng(1);
  for (double tau : {0.05, 0.5}) {
    std::bernoulli_distribution hit(tau);
    int rej_uc = 0, rej_cc = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<int> v(500);
      for (int& x : v) x = hit(rng);
      rej_uc += !lr_uc(v, tau).accept(0.05);
      rej_cc += !lr_cc(v, tau).accept(0.05);
    }
    EXPECT_GE(rej_uc / 1000.0, 0.03) << tau;
    EXPECT_LE(rej_uc / 1000.0, 0.08) << tau;
    EXPECT_GE(rej_cc / 1000.0, 0.03) << tau;
    EXPECT_LE(rej_cc / 1000.0, 0.08) << tau;
  }
}

TEST(Coverage, LongRunSizeMatchesReference) {
  std::mt19937_64 rng(99);
  std::bernoulli_distribution hit(0.05);
  int rej_cc = 0;
  const int reps = 20000;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<int> v(500);
    for (int& x : v) x = hit(rng);
    rej_cc += !lr_cc(v, 0.05).accept(0.05);
  }
  // 4 standard errors around the reference 0.0396.
  EXPECT_NEAR(rej_cc / double(reps), 0.0396, 4 * std::sqrt(0.0396 * 0.9604 / reps));
}

struct CalibratedPanel {
  train::QuantilePanel q;
  Matrix returns;
};

CalibratedPanel calibrated(Index stocks, Index days, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  CalibratedPanel p;
  p.returns = Matrix::NullaryExpr(stocks, days, [&] { return z(rng); });
  p.q.levels = train::quantile_levels(k);
  for (Index t = 0; t < days; ++t) p.q.days.push_back(t);
  for (double tau : p.q.levels) p.q.values.push_back(Matrix::Constant(stocks, days, normal_quantile(tau)));
  return p;
}

TEST(Omega, AlphaZeroKeepsEveryLevel) {
  auto p = calibrated(4, 300, 9, 1);
  for (auto& v : p.q.values) v.array() += 0.8;  // badly biased on purpose
  const auto omega = build_omega(p.q, p.returns, 0.0);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(omega.size(i), 9);
}

TEST(Omega, NestsInAlpha) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = calibrated(3, 250, 19, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> bias(0, 0.1);
    for (auto& v : p.q.values) v.array() += bias(rng);
    const auto loose = build_omega(p.q, p.returns, 0.01);
    const auto strict = build_omega(p.q, p.returns, 0.10);
    for (Index i = 0; i < 3; ++i)
      for (int l : strict.accepted[i])
        EXPECT_NE(std::find(loose.accepted[i].begin(), loose.accepted[i].end(), l), loose.accepted[i].end());
  }
}

TEST(Omega, CalibratedQuantilesMostlyAccepted) {
  const auto p = calibrated(10, 500, 19, 7);
  const auto omega = build_omega(p.q, p.returns, 0.01);
  int kept = 0;
  for (Index i = 0; i < 10; ++i) kept += omega.size(i);
  EXPECT_GE(kept / (10.0 * 19), 0.9);
}

TEST(Filter, BoundaryAtK0) {
  OmegaSet omega;
  omega.levels = train::quantile_levels(40);
  std::vector<int> thirty(30), twenty_nine(29);
  std::iota(thirty.begin(), thirty.end(), 0);
  std::iota(twenty_nine.begin(), twenty_nine.end(), 0);
  omega.accepted = {thirty, twenty_nine, thirty};
  EXPECT_EQ(filter_stocks(omega, 30), (std::vector<Index>{0, 2}));
  omega.accepted = {twenty_nine};
  EXPECT_THROW(filter_stocks(omega, 30, {"AAA"}), PipelineError);
}

TEST(TTest, ZeroResidualsAccept) {
  const auto r = t_test(Vector::Zero(50));
  EXPECT_DOUBLE_EQ(r.tstat, 0.0);
  EXPECT_TRUE(r.accept(0.99));
  const auto c = t_test(Vector::Constant(50, 1.0));
  EXPECT_FALSE(c.defined);
  EXPECT_FALSE(c.accept(0.01));
  EXPECT_THROW(t_test(Vector::Zero(10)), Error);
}

TEST(TTest, MatchesFormula) {
  Vector e(30);
  for (Index t = 0; t < 30; ++t) e(t) = 0.1 * static_cast<double>(t % 7) - 0.2;
  const double m = e.mean();
  const double sd = std::sqrt((e.array() - m).square().sum() / 29);
  const auto r = t_test(e);
  EXPECT_NEAR(r.tstat, m / (sd / std::sqrt(30.0)), 1e-12);
  EXPECT_NEAR(r.p_value, student_t_two_sided(r.tstat, 29), 1e-12);
}

TEST(TTest, ShiftedNormalRejects) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.5, 1);
  Vector e(500);
  for (Index t = 0; t < 500; ++t) e(t) = z(rng);
  EXPECT_FALSE(t_test(e).accept(0.05));
}

TEST(MomentResiduals, Definitions) {
  Vector r(1), mu(1), h(1), s(1), k(1);
  r << 0.3;
  mu << 0.1;
  h << 0.04;
  s << 0.5;
  k << 4;
  EXPECT_NEAR(moment_residuals(Moment::Mean, r, mu, h, s, k)(0), 0.2, 1e-15);
  EXPECT_NEAR(moment_residuals(Moment::Variance, r, mu, h, s, k)(0), 0.0, 1e-15);
  EXPECT_NEAR(moment_residuals(Moment::Skewness, r, mu, h, s, k)(0), 1.0 - 0.5, 1e-12);
  EXPECT_NEAR(moment_residuals(Moment::Kurtosis, r, mu, h, s, k)(0), 1.0 - 4, 1e-12);
}

// Exact moments of a Gaussian GARCH-like panel pass the mean and variance tests.
TEST(MomentTests, ExactMomentsMostlyAccepted) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  const Index n = 40, days = 400;
  qcm::MomentPanel m;
  m.mu = Matrix::Constant(n, days, 0.001);
  m.h = Matrix::Zero(n, days);
  m.s = Matrix::Zero(n, days);
  m.k = Matrix::Constant(n, days, 3.0);
  Matrix r(n, days);
  for (Index t = 0; t < days; ++t) m.days.push_back(t);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < days; ++t) {
      m.h(i, t) = 1e-4 * (1 + 0.5 * std::sin(0.1 * static_cast<double>(t + i)));
      r(i, t) = m.mu(i, t) + std::sqrt(m.h(i, t)) * z(rng);
    }
  std::vector<Index> stocks(n);
  std::iota(stocks.begin(), stocks.end(), 0);
  const auto results = moment_ttests(r, m, stocks);
  EXPECT_GE(acceptance_rate(results, Moment::Mean, 0.01), 90.0);
  EXPECT_GE(acceptance_rate(results, Moment::Variance, 0.01), 90.0);
}

}  // namespace
}  // namespace grace::diag
