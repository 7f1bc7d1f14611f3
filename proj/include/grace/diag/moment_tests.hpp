#pragma once

#include <array>
#include <string>
#include <vector>

#include "grace/qcm/qcm.hpp"

namespace grace::diag {

enum class Moment { Mean, Variance, Skewness, Kurtosis };
inline constexpr std::array<Moment, 4> kMoments{Moment::Mean, Moment::Variance, Moment::Skewness,
                                                Moment::Kurtosis};
std::string moment_name(Moment m);

struct TTestResult {
  double mean = 0;
  double tstat = 0;
  double p_value = 1;
  bool defined = true;  // false when the residuals have zero variance but nonzero mean

  bool accept(double alpha) const { return defined && p_value >= alpha; }
};

// One-sample two-sided t test of mean(e) = 0. Needs at least 30 observations.
TTestResult t_test(const Vector& residuals);

// Residuals of moment m for one stock: r - mu, (r - mu)^2 - h, z^3 - s, z^4 - k.
Vector moment_residuals(Moment m, const Vector& returns, const Vector& mu, const Vector& h,
                        const Vector& s, const Vector& k);

struct StockTests {
  Index stock = 0;
  std::array<TTestResult, 4> tests;
};

// Tests for every listed stock over the panel's days.
std::vector<StockTests> moment_ttests(const Matrix& returns, const qcm::MomentPanel& moments,
                                      const std::vector<Index>& stocks);

// Percentage of stocks whose test for `m` accepts at `alpha`.
double acceptance_rate(const std::vector<StockTests>& results, Moment m, double alpha);

}  // namespace grace::diag
