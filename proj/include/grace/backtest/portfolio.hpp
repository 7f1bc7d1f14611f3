#pragma once

#include <string>
#include <vector>

#include "grace/backtest/measures.hpp"
#include "grace/qcm/qcm.hpp"

namespace grace::backtest {

inline constexpr double kTradingDays = 252.0;

// Decile of each pool member (same order as the input), 1 = smallest values.
// Rank r (0-based, ascending value, ties by id) gets floor(10 r / pool) + 1.
struct DecileAssignment {
  std::vector<Index> ids;
  std::vector<int> decile;
  std::vector<Index> long_leg;   // decile 10
  std::vector<Index> short_leg;  // decile 1
};

DecileAssignment decile_sort(const std::vector<double>& values, const std::vector<Index>& ids);

// Only the extreme deciles, without sorting the middle of the pool.
void extreme_deciles(const std::vector<double>& values, const std::vector<Index>& ids,
                     std::vector<Index>& long_leg, std::vector<Index>& short_leg);

struct PortfolioSeries {
  std::vector<Index> days;
  std::vector<double> gross, turnover, net;
  double cost = 0;
  int excluded_cells = 0;  // stock-days dropped for a degenerate ratio measure

  Index size() const { return static_cast<Index>(days.size()); }
};

// Equal-weight long/short legs realized with returns(., day). Turnover is the
// sum of |w_t - w_{t-1}| over both legs, starting from an empty book.
PortfolioSeries longshort_returns(const std::vector<std::vector<Index>>& long_legs,
                                  const std::vector<std::vector<Index>>& short_legs,
                                  const Matrix& returns, const std::vector<Index>& days, double cost);

// Ranks the pool on every day of the moment panel with `spec` and trades it.
PortfolioSeries run_backtest(const MeasureSpec& spec, const qcm::MomentPanel& moments,
                             const Matrix& returns, const std::vector<Index>& pool, double cost);

struct Annualized {
  double return_pct = 0;
  double risk_pct = 0;
  double sharpe = 0;
};

// 252 mean(excess) and sqrt(252) sd(excess), in percent, with their ratio.
Annualized annualize(const std::vector<double>& net, const std::vector<double>& risk_free);

}  // namespace grace::backtest
