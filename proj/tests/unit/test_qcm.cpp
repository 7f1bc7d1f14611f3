#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "grace/core/special_functions.hpp"
#include "grace/qcm/qcm.hpp"

namespace grace::qcm {
namespace {

std::vector<double> levels(int k) { return train::quantile_levels(k); }

TEST(Design, MedianRowAndSymmetry) {
  const auto grid = build_design({0.1, 0.3, 0.5, 0.7, 0.9});
  EXPECT_DOUBLE_EQ(grid.design(2, 0), 1.0);
  EXPECT_NEAR(grid.design(2, 1), 0.0, 1e-15);
  EXPECT_NEAR(grid.design(2, 2), -1.0, 1e-15);
  EXPECT_NEAR(grid.design(2, 3), 0.0, 1e-15);
  EXPECT_NEAR(grid.design.col(1).sum(), 0.0, 1e-12);
  EXPECT_NEAR(grid.design.col(3).sum(), 0.0, 1e-12);
}

// Pinned from an independent numpy eigen-solve.
TEST(Design, SmallestEigenvalueAtK199) {
  const auto grid = build_design(levels(199));
  const Matrix g = grid.design.transpose() * grid.design / 199.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  EXPECT_NEAR(eig.eigenvalues().minCoeff(), 0.899458326025128, 1e-9);
}

TEST(Design, NeedsFourLevels) { EXPECT_THROW(build_design({0.2, 0.5, 0.8}), Error); }

TEST(Fit, GaussianQuantilesAreExact) {
  const auto grid = build_design(levels(99));
  Vector q(99);
  for (Index k = 0; k < 99; ++k) q(k) = 0.02 + 0.3 * grid.z(k);
  const auto fit = fit_qcm(q, grid);
  EXPECT_NEAR(fit.beta(0), 0.02, 1e-12);
  EXPECT_NEAR(fit.moments.h, 0.09, 1e-10);
  EXPECT_NEAR(fit.moments.s, 0.0, 1e-10);
  EXPECT_NEAR(fit.moments.k, 3.0, 1e-10);
  EXPECT_FALSE(fit.moments.projected);
}

// Standardized chi-square(8) quantiles; constants from an independent
// least-squares solve.
TEST(Fit, ChiSquareEightPinned) {
  const auto lv = levels(199);
  const auto grid = build_design(lv);
  Vector q(199);
  for (Index k = 0; k < 199; ++k) {
    // Invert the chi-square CDF by bisection on the regularized gamma.
    double lo = 0, hi = 100;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (regularized_gamma_p(4.0, mid / 2) < lv[k] ? lo : hi) = mid;
    }
    q(k) = (0.5 * (lo + hi) - 8.0) / 4.0;
  }
  const auto m = fit_qcm(q, grid).moments;
  EXPECT_NEAR(m.h, 0.946789105432076, 1e-9);
  EXPECT_NEAR(m.s, 1.0063474298413977, 1e-9);
  EXPECT_NEAR(m.k, 3.1838856461341583, 1e-9);
  EXPECT_GT(m.s, 0);
  EXPECT_GT(m.k - 3, 0);
}

TEST(Feasibility, Projection) {
  const auto ok = project_feasible({1, 0, 2.5, false, false});
  EXPECT_DOUBLE_EQ(ok.k, 2.5);
  EXPECT_FALSE(ok.projected);
  const auto fixed = project_feasible({1, 2, 3, false, false});
  EXPECT_DOUBLE_EQ(fixed.k, 5.0);
  EXPECT_TRUE(fixed.projected);
}

TEST(Fit, DecreasingQuantilesAreDegenerate) {
  const auto grid = build_design(levels(9));
  Vector q = -grid.z;
  const auto fit = fit_qcm(q, grid);
  EXPECT_TRUE(fit.moments.degenerate);
  EXPECT_TRUE(std::isfinite(fit.moments.s));
}

TEST(Invariance, LocationAndScale) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const auto grid = build_design(levels(19));
  for (int rep = 0; rep < 50; ++rep) {
    Vector q(19);
    for (Index k = 0; k < 19; ++k) q(k) = z(rng);
    std::sort(q.data(), q.data() + 19);
    const auto base = fit_qcm(q, grid).moments;
    const auto moved = fit_qcm((q.array() + 3.7).matrix(), grid).moments;
    const auto scaled = fit_qcm(2.5 * q, grid).moments;
    EXPECT_NEAR(moved.h, base.h, 1e-10);
    EXPECT_NEAR(moved.s, base.s, 1e-10);
    EXPECT_NEAR(moved.k, base.k, 1e-10);
    EXPECT_NEAR(scaled.h, 6.25 * base.h, 1e-9);
    EXPECT_NEAR(scaled.s, base.s, 1e-10);
    EXPECT_NEAR(scaled.k, base.k, 1e-10);
  }
}

train::QuantilePanel gaussian_panel(Index stocks, Index days, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  train::QuantilePanel p;
  p.levels = levels(k);
  for (Index t = 0; t < days; ++t) p.days.push_back(t);
  Matrix sd = Matrix::NullaryExpr(stocks, days, [&] { return u(rng); });
  for (double tau : p.levels) p.values.push_back(sd * normal_quantile(tau));
  return p;
}

TEST(Panel, FullOmegaMatchesUnrestrictedFit) {
  const auto p = gaussian_panel(2, 3, 9, 1);
  std::vector<int> all(9);
  std::iota(all.begin(), all.end(), 0);
  const auto m = qcm_panel(p, {all, all}, Matrix::Zero(2, 3));
  const auto grid = build_design(p.levels);
  Vector q(9);
  for (int l = 0; l < 9; ++l) q(l) = p.values[l](1, 2);
  EXPECT_DOUBLE_EQ(m.h(1, 2), fit_qcm(q, grid).moments.h);
  EXPECT_TRUE(m.usable[0]);
}

TEST(Panel, StocksUseIndependentDesigns) {
  auto p = gaussian_panel(2, 4, 9, 2);
  const std::vector<std::vector<int>> omega{{0, 2, 4, 6, 8}, {1, 2, 3, 4, 5, 6, 7}};
  const auto before = qcm_panel(p, omega, Matrix::Zero(2, 4));
  for (auto& v : p.values) v.row(0) *= 3.0;
  const auto after = qcm_panel(p, omega, Matrix::Zero(2, 4));
  EXPECT_EQ(before.h.row(1), after.h.row(1));
  EXPECT_EQ(before.k.row(1), after.k.row(1));
  EXPECT_NEAR(after.h(0, 0), 9 * before.h(0, 0), 1e-12);
}

TEST(Panel, TooFewLevelsMarksStockUnusable) {
  const auto p = gaussian_panel(2, 2, 9, 3);
  std::vector<int> all(9);
  std::iota(all.begin(), all.end(), 0);
  const auto m = qcm_panel(p, {all, {0, 1, 2}}, Matrix::Zero(2, 2));
  EXPECT_TRUE(m.usable[0]);
  EXPECT_FALSE(m.usable[1]);
}

}  // namespace
}  // namespace grace::qcm
