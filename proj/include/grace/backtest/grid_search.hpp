#pragma once

#include <array>
#include <vector>

#include "grace/backtest/portfolio.hpp"

namespace grace::backtest {

// A1 = {a 10^-b : a = 1..9, b = -1..3}; A2 = A3 = {a 10^-b : a = 1..9, b = 2..6}.
struct LambdaGrid {
  std::vector<double> a1, a2, a3;

  static LambdaGrid standard();
  static std::vector<double> powers(int b_first, int b_last);
};

using Lambdas = std::array<double, 3>;

// Candidate tuples for a measure in ascending lexicographic order.
std::vector<Lambdas> candidates(MeasureKind kind, const LambdaGrid& grid);

struct GridResult {
  MeasureSpec best;
  double sharpe = 0;
  std::size_t evaluated = 0;
  std::size_t degenerate = 0;
};

// In-sample Sharpe maximization; the first (smallest) tuple wins ties.
GridResult grid_search_lambdas(MeasureKind kind, const qcm::MomentPanel& in_sample,
                               const Matrix& returns, const std::vector<Index>& pool,
                               const std::vector<double>& risk_free, double cost,
                               const LambdaGrid& grid = LambdaGrid::standard());

}  // namespace grace::backtest
