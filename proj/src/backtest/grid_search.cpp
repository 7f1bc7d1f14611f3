#include "grace/backtest/grid_search.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace grace::backtest {

namespace {

// Candidate evaluation without per-day allocation. The valid cells of every
// day are gathered once; each candidate then only recomputes measure values,
// picks the two extreme deciles and accumulates the long-short series. It
// reproduces run_backtest() followed by annualize().
class FastBacktester {
 public:
  FastBacktester(MeasureKind kind, const qcm::MomentPanel& m, const Matrix& returns,
                 const std::vector<Index>& pool, double cost)
      : kind_(kind), days_(m.days), cost_(cost) {
    const bool needs_h = kind == MeasureKind::SR || kind == MeasureKind::SRSK;
    offsets_.push_back(0);
    for (Index t = 0; t < m.size(); ++t) {
      for (Index i : pool) {
        if (needs_h && !(m.h(i, t) > 0)) continue;
        ids_.push_back(i);
        ret_.push_back(returns(i, days_[static_cast<std::size_t>(t)]));
        mu_.push_back(m.mu(i, t));
        h_.push_back(m.h(i, t));
        s_.push_back(m.s(i, t));
        k_.push_back(m.k(i, t));
        ratio_.push_back(needs_h ? m.mu(i, t) / std::sqrt(m.h(i, t)) : 0.0);
      }
      const std::size_t count = ids_.size() - offsets_.back();
      if (count < 10)
        throw UsageError("decile sort needs at least 10 stocks, pool has " + std::to_string(count));
      widest_ = std::max(widest_, count);
      offsets_.push_back(ids_.size());
    }
    values_.resize(widest_);
    order_.resize(widest_);
    short_.resize(widest_);
    long_.resize(widest_);
    cur_.reserve(widest_);
    prev_.reserve(widest_);
  }

  const std::vector<double>& net(const MeasureSpec& spec) {
    switch (kind_) {
      case MeasureKind::M: return run<MeasureKind::M>(spec);
      case MeasureKind::MV: return run<MeasureKind::MV>(spec);
      case MeasureKind::MVSK: return run<MeasureKind::MVSK>(spec);
      case MeasureKind::SR: return run<MeasureKind::SR>(spec);
      case MeasureKind::SRSK: return run<MeasureKind::SRSK>(spec);
    }
    return run<MeasureKind::M>(spec);
  }

 private:
  template <MeasureKind Kind>
  void fill_values(const MeasureSpec& spec, std::size_t lo, std::size_t count) {
    const double l1 = spec.lambda1, l2 = spec.lambda2, l3 = spec.lambda3;
    const double* mu = mu_.data() + lo;
    const double* h = h_.data() + lo;
    const double* s = s_.data() + lo;
    const double* k = k_.data() + lo;
    const double* ratio = ratio_.data() + lo;
    double* v = values_.data();
    for (std::size_t c = 0; c < count; ++c) {
      if constexpr (Kind == MeasureKind::M) v[c] = mu[c];
      if constexpr (Kind == MeasureKind::MV) v[c] = mu[c] - l1 * h[c];
      if constexpr (Kind == MeasureKind::MVSK) v[c] = mu[c] - l1 * h[c] + l2 * s[c] - l3 * k[c];
      if constexpr (Kind == MeasureKind::SR) v[c] = ratio[c];
      if constexpr (Kind == MeasureKind::SRSK) v[c] = ratio[c] + l2 * s[c] - l3 * k[c];
    }
    bool finite = true;
    for (std::size_t c = 0; c < count; ++c)
      finite &= std::abs(v[c]) <= std::numeric_limits<double>::max();
    if (!finite) throw NumericError("decile sort: non-finite measure value");
  }

  template <MeasureKind Kind>
  const std::vector<double>& run(const MeasureSpec& spec) {
    out_.clear();
    prev_.clear();
    for (std::size_t d = 0; d < days_.size(); ++d) {
      const std::size_t lo = offsets_[d], count = offsets_[d + 1] - lo;
      fill_values<Kind>(spec, lo, count);
      const std::size_t ns = (count + 9) / 10;
      const std::size_t nl = count - (9 * count + 9) / 10;
      select(count, ns, nl);

      // Legs are ascending in cell index, which is ascending in stock id.
      const Index* ids = ids_.data() + lo;
      const double* r = ret_.data() + lo;
      const double wl = 1.0 / static_cast<double>(nl), ws = 1.0 / static_cast<double>(ns);
      double gross = 0;
      for (std::size_t a = 0; a < nl; ++a) gross += r[long_[a]] / static_cast<double>(nl);
      for (std::size_t b = 0; b < ns; ++b) gross -= r[short_[b]] / static_cast<double>(ns);

      cur_.clear();
      std::size_t a = 0, b = 0;
      while (a < nl || b < ns) {
        if (b == ns || (a < nl && long_[a] < short_[b]))
          cur_.push_back({ids[long_[a++]], wl});
        else
          cur_.push_back({ids[short_[b++]], -ws});
      }
      double turnover = 0;
      std::size_t p = 0, q = 0;
      const std::size_t pc = cur_.size(), qc = prev_.size();
      while (p < pc || q < qc) {
        if (q == qc || (p < pc && cur_[p].first < prev_[q].first))
          turnover += std::abs(cur_[p++].second);
        else if (p == pc || prev_[q].first < cur_[p].first)
          turnover += std::abs(prev_[q++].second);
        else
          turnover += std::abs(cur_[p++].second - prev_[q++].second);
      }
      out_.push_back(gross - cost_ * turnover);
      std::swap(prev_, cur_);
    }
    return out_;
  }

  // Fills short_[0, ns) and long_[0, nl) with cell indices in ascending order.
  void select(std::size_t count, std::size_t ns, std::size_t nl) {
    const double* v = values_.data();
    if (ns <= kSmall && nl <= kSmall) {
      // Bounded insertion with lo ascending and hi descending. Cells arrive in
      // index order, so a newcomer loses every tie on the short side and wins
      // every tie on the long side.
      std::array<std::size_t, kSmall> lo{}, hi{};
      std::size_t nlo = 0, nhi = 0;
      for (std::size_t c = 0; c < count; ++c) {
        const double x = v[c];
        if (nlo < ns || x < v[lo[nlo - 1]]) {
          std::size_t pos = nlo < ns ? nlo++ : nlo - 1;
          while (pos > 0 && x < v[lo[pos - 1]]) {
            lo[pos] = lo[pos - 1];
            --pos;
          }
          lo[pos] = c;
        }
        if (nhi < nl || x >= v[hi[nhi - 1]]) {
          std::size_t pos = nhi < nl ? nhi++ : nhi - 1;
          while (pos > 0 && x >= v[hi[pos - 1]]) {
            hi[pos] = hi[pos - 1];
            --pos;
          }
          hi[pos] = c;
        }
      }
      std::sort(lo.begin(), lo.begin() + static_cast<std::ptrdiff_t>(ns));
      std::sort(hi.begin(), hi.begin() + static_cast<std::ptrdiff_t>(nl));
      std::copy_n(lo.begin(), ns, short_.begin());
      std::copy_n(hi.begin(), nl, long_.begin());
      return;
    }
    for (std::size_t c = 0; c < count; ++c) order_[c] = c;
    auto less = [v](std::size_t a, std::size_t b) { return v[a] != v[b] ? v[a] < v[b] : a < b; };
    auto first = order_.begin(), last = order_.begin() + static_cast<std::ptrdiff_t>(count);
    const auto sc = static_cast<std::ptrdiff_t>(ns);
    const auto ls = static_cast<std::ptrdiff_t>(count - nl);
    std::nth_element(first, first + sc, last, less);
    std::nth_element(first + sc, first + ls, last, less);
    std::sort(first, first + sc);
    std::sort(first + ls, last);
    std::copy(first, first + sc, short_.begin());
    std::copy(first + ls, last, long_.begin());
  }

  static constexpr std::size_t kSmall = 8;
  MeasureKind kind_;
  std::vector<Index> days_;
  double cost_;
  std::vector<std::size_t> offsets_;
  std::vector<Index> ids_;
  std::vector<double> ret_, mu_, h_, s_, k_, ratio_;
  std::size_t widest_ = 0;
  std::vector<double> values_, out_;
  std::vector<std::size_t> order_, short_, long_;
  std::vector<std::pair<Index, double>> prev_, cur_;
};

}  // namespace

std::vector<double> LambdaGrid::powers(int b_first, int b_last) {
  std::vector<double> out;
  for (int b = b_last; b >= b_first; --b)
    for (int a = 1; a <= 9; ++a) out.push_back(a * std::pow(10.0, -b));
  std::sort(out.begin(), out.end());
  return out;
}

LambdaGrid LambdaGrid::standard() {
  return LambdaGrid{powers(-1, 3), powers(2, 6), powers(2, 6)};
}

std::vector<Lambdas> candidates(MeasureKind kind, const LambdaGrid& grid) {
  std::vector<Lambdas> out;
  switch (kind) {
    case MeasureKind::M:
    case MeasureKind::SR:
      out.push_back({0, 0, 0});
      break;
    case MeasureKind::MV:
      for (double l1 : grid.a1) out.push_back({l1, 0, 0});
      break;
    case MeasureKind::SRSK:
      for (double l2 : grid.a2)
        for (double l3 : grid.a3) out.push_back({0, l2, l3});
      break;
    case MeasureKind::MVSK:
      for (double l1 : grid.a1)
        for (double l2 : grid.a2)
          for (double l3 : grid.a3) out.push_back({l1, l2, l3});
      break;
  }
  return out;
}

GridResult grid_search_lambdas(MeasureKind kind, const qcm::MomentPanel& in_sample,
                               const Matrix& returns, const std::vector<Index>& pool,
                               const std::vector<double>& risk_free, double cost,
                               const LambdaGrid& grid) {
  const auto tuples = candidates(kind, grid);
  if (tuples.empty()) throw UsageError("grid search: empty candidate grid");
  FastBacktester bt(kind, in_sample, returns, pool, cost);
  GridResult result;
  bool found = false;
  for (const Lambdas& l : tuples) {
    const MeasureSpec spec{kind, l[0], l[1], l[2]};
    ++result.evaluated;
    double sharpe = 0;
    try {
      sharpe = annualize(bt.net(spec), risk_free).sharpe;
    } catch (const NumericError&) {
      ++result.degenerate;
      if (tuples.size() == 1) {
        result.best = spec;
        found = true;
      }
      continue;
    }
    if (!found || sharpe > result.sharpe) {
      result.best = spec;
      result.sharpe = sharpe;
      found = true;
    }
  }
  if (!found)
    throw PipelineError("grid search for " + measure_name(kind) +
                        ": every candidate portfolio is degenerate");
  return result;
}

}  // namespace grace::backtest
