#include "grace/backtest/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grace::backtest {

namespace {

void check_pool(const std::vector<double>& values, const std::vector<Index>& ids) {
  require_shape(values.size() == ids.size(), "decile sort: values and ids differ in length");
  if (values.size() < 10)
    throw UsageError("decile sort needs at least 10 stocks, pool has " + std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("decile sort: non-finite measure value");
}

struct ByValue {
  const std::vector<double>* values;
  const std::vector<Index>* ids;
  bool operator()(std::size_t a, std::size_t b) const {
    if ((*values)[a] != (*values)[b]) return (*values)[a] < (*values)[b];
    return (*ids)[a] < (*ids)[b];
  }
};

}  // namespace

DecileAssignment decile_sort(const std::vector<double>& values, const std::vector<Index>& ids) {
  check_pool(values, ids);
  const std::size_t pool = values.size();
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), ByValue{&values, &ids});
  DecileAssignment a;
  a.ids = ids;
  a.decile.assign(pool, 0);
  for (std::size_t r = 0; r < pool; ++r) {
    const int d = static_cast<int>(10 * r / pool) + 1;
    a.decile[order[r]] = d;
    if (d == 10) a.long_leg.push_back(ids[order[r]]);
    if (d == 1) a.short_leg.push_back(ids[order[r]]);
  }
  std::sort(a.long_leg.begin(), a.long_leg.end());
  std::sort(a.short_leg.begin(), a.short_leg.end());
  return a;
}

void extreme_deciles(const std::vector<double>& values, const std::vector<Index>& ids,
                     std::vector<Index>& long_leg, std::vector<Index>& short_leg) {
  check_pool(values, ids);
  const std::size_t pool = values.size();
  // Decile 1 holds ranks r with 10 r < pool; decile 10 ranks with 10 r >= 9 pool.
  const std::size_t short_count = (pool + 9) / 10;
  const std::size_t long_start = (9 * pool + 9) / 10;
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), 0);
  const ByValue less{&values, &ids};
  std::nth_element(order.begin(), order.begin() + short_count, order.end(), less);
  short_leg.clear();
  for (std::size_t r = 0; r < short_count; ++r) short_leg.push_back(ids[order[r]]);
  std::nth_element(order.begin() + short_count, order.begin() + long_start, order.end(), less);
  long_leg.clear();
  for (std::size_t r = long_start; r < pool; ++r) long_leg.push_back(ids[order[r]]);
  std::sort(long_leg.begin(), long_leg.end());
  std::sort(short_leg.begin(), short_leg.end());
}

PortfolioSeries longshort_returns(const std::vector<std::vector<Index>>& long_legs,
                                  const std::vector<std::vector<Index>>& short_legs,
                                  const Matrix& returns, const std::vector<Index>& days, double cost) {
  if (long_legs.size() != days.size() || short_legs.size() != days.size())
    throw ShapeError("long-short: " + std::to_string(days.size()) + " dates but " +
                     std::to_string(long_legs.size()) + "/" + std::to_string(short_legs.size()) +
                     " leg assignments");
  if (cost < 0) throw UsageError("transaction cost must be nonnegative");
  PortfolioSeries out;
  out.days = days;
  out.cost = cost;
  Vector prev = Vector::Zero(returns.rows());
  Vector w(returns.rows());
  for (std::size_t d = 0; d < days.size(); ++d) {
    const Index t = days[d];
    if (t < 0 || t >= returns.cols()) throw ShapeError("long-short: date index outside the return panel");
    const auto& L = long_legs[d];
    const auto& S = short_legs[d];
    if (L.empty() || S.empty()) throw UsageError("long-short: empty leg on day " + std::to_string(t));
    w.setZero();
    double gross = 0;
    for (Index i : L) {
      w(i) += 1.0 / static_cast<double>(L.size());
      gross += returns(i, t) / static_cast<double>(L.size());
    }
    for (Index i : S) {
      w(i) -= 1.0 / static_cast<double>(S.size());
      gross -= returns(i, t) / static_cast<double>(S.size());
    }
    const double turnover = (w - prev).cwiseAbs().sum();
    out.gross.push_back(gross);
    out.turnover.push_back(turnover);
    out.net.push_back(gross - cost * turnover);
    prev = w;
  }
  return out;
}

PortfolioSeries run_backtest(const MeasureSpec& spec, const qcm::MomentPanel& moments,
                             const Matrix& returns, const std::vector<Index>& pool, double cost) {
  const Index days = moments.size();
  std::vector<std::vector<Index>> longs(days), shorts(days);
  std::vector<double> values;
  std::vector<Index> ids;
  int excluded = 0;
  for (Index t = 0; t < days; ++t) {
    values.clear();
    ids.clear();
    for (Index i : pool) {
      const auto v = compute_measure(spec, moments.mu(i, t), moments.h(i, t), moments.s(i, t),
                                     moments.k(i, t));
      if (!v) {
        ++excluded;
        continue;
      }
      values.push_back(*v);
      ids.push_back(i);
    }
    extreme_deciles(values, ids, longs[t], shorts[t]);
  }
  PortfolioSeries out = longshort_returns(longs, shorts, returns, moments.days, cost);
  out.excluded_cells = excluded;
  return out;
}

Annualized annualize(const std::vector<double>& net, const std::vector<double>& risk_free) {
  if (net.size() < 30)
    throw SampleSizeError("annualize needs at least 30 daily observations, got " +
                          std::to_string(net.size()));
  require_shape(risk_free.size() == net.size(), "annualize: risk-free series length differs");
  const Index n = static_cast<Index>(net.size());
  Vector excess(n);
  for (Index t = 0; t < n; ++t) excess(t) = net[t] - risk_free[t];
  const double mean = excess.mean();
  const double sd = std::sqrt((excess.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 1e-15 * std::max(1.0, std::abs(mean))))
    throw NumericError("annualize: zero risk, Sharpe ratio undefined");
  Annualized a;
  a.return_pct = 100.0 * kTradingDays * mean;
  a.risk_pct = 100.0 * std::sqrt(kTradingDays) * sd;
  a.sharpe = a.return_pct / a.risk_pct;
  return a;
}

}  // namespace grace::backtest
