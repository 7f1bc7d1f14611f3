#pragma once

#include <string>
#include <vector>

#include "grace/train/trainer.hpp"

namespace grace::diag {

inline constexpr Index kMinCoverageSample = 30;

struct CoverageResult {
  double statistic = 0;
  int dof = 1;
  double p_value = 1;

  // Accepted at level alpha iff p >= alpha, so alpha = 0 accepts everything.
  bool accept(double alpha) const { return p_value >= alpha; }
};

// v_t = 1{r_t < q_t}.
template <typename DerivedR, typename DerivedQ>
std::vector<int> violations(const Eigen::MatrixBase<DerivedR>& returns,
                            const Eigen::MatrixBase<DerivedQ>& quantiles) {
  require_shape(returns.size() == quantiles.size(), "violations: series lengths differ");
  std::vector<int> v(static_cast<std::size_t>(returns.size()));
  for (Index t = 0; t < returns.size(); ++t) v[t] = returns(t) < quantiles(t) ? 1 : 0;
  return v;
}

// Kupiec unconditional coverage, chi-square(1).
CoverageResult lr_uc(const std::vector<int>& v, double tau);
// First-order Markov independence component alone, chi-square(1).
CoverageResult lr_ind(const std::vector<int>& v);
// Christoffersen conditional coverage = LR_uc + LR_ind, chi-square(2).
CoverageResult lr_cc(const std::vector<int>& v, double tau);

// Level indices accepted by both tests, per stock.
struct OmegaSet {
  std::vector<double> levels;
  std::vector<std::vector<int>> accepted;

  Index stocks() const { return static_cast<Index>(accepted.size()); }
  int size(Index stock) const { return static_cast<int>(accepted[stock].size()); }
};

// `returns` is the full stocks x days panel; quantile days index into it.
OmegaSet build_omega(const train::QuantilePanel& in_sample, const Matrix& returns, double alpha);

// Stocks with |Omega_i| >= k0. Throws PipelineError listing every |Omega_i|
// when nothing survives.
std::vector<Index> filter_stocks(const OmegaSet& omega, int k0,
                                 const std::vector<std::string>& tickers = {});

}  // namespace grace::diag
