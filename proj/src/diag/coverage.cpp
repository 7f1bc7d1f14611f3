#include "grace/diag/coverage.hpp"

#include <cmath>

#include "grace/core/special_functions.hpp"
#include "grace/train/losses.hpp"

namespace grace::diag {

namespace {

// x log(p) with the 0 log 0 = 0 convention.
double xlog(double x, double p) { return x == 0 ? 0.0 : x * std::log(p); }

void check_series(const std::vector<int>& v) {
  if (static_cast<Index>(v.size()) < kMinCoverageSample)
    throw SampleSizeError("coverage test needs at least " + std::to_string(kMinCoverageSample) +
                          " observations, got " + std::to_string(v.size()));
  for (int x : v)
    if (x != 0 && x != 1) throw UsageError("violation series must be binary");
}

CoverageResult finish(double stat, int dof) {
  stat = std::max(stat, 0.0);
  return CoverageResult{stat, dof, chi_square_sf(stat, dof)};
}

}  // namespace

CoverageResult lr_uc(const std::vector<int>& v, double tau) {
  train::require_level(tau);
  check_series(v);
  const double total = static_cast<double>(v.size());
  double n = 0;
  for (int x : v) n += x;
  const double p_hat = n / total;
  const double null_ll = xlog(total - n, 1 - tau) + xlog(n, tau);
  const double alt_ll = xlog(total - n, 1 - p_hat) + xlog(n, p_hat);
  return finish(-2.0 * (null_ll - alt_ll), 1);
}

CoverageResult lr_ind(const std::vector<int>& v) {
  check_series(v);
  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  for (std::size_t t = 1; t < v.size(); ++t) {
    if (v[t - 1] == 0) (v[t] ? n01 : n00) += 1;
    else (v[t] ? n11 : n10) += 1;
  }
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  const double pi01 = ratio(n01, n00 + n01);
  const double pi11 = ratio(n11, n10 + n11);
  const double pi = ratio(n01 + n11, n00 + n01 + n10 + n11);
  const double null_ll = xlog(n00 + n10, 1 - pi) + xlog(n01 + n11, pi);
  const double alt_ll = xlog(n00, 1 - pi01) + xlog(n01, pi01) + xlog(n10, 1 - pi11) + xlog(n11, pi11);
  return finish(-2.0 * (null_ll - alt_ll), 1);
}

CoverageResult lr_cc(const std::vector<int>& v, double tau) {
  return finish(lr_uc(v, tau).statistic + lr_ind(v).statistic, 2);
}

OmegaSet build_omega(const train::QuantilePanel& in_sample, const Matrix& returns, double alpha) {
  if (!(alpha >= 0 && alpha < 1)) throw UsageError("alpha must lie in [0, 1)");
  const Index n = in_sample.stocks();
  require_shape(returns.rows() == n, "build_omega: returns panel has " +
                                         std::to_string(returns.rows()) + " stocks, quantiles " +
                                         std::to_string(n));
  const Index days = static_cast<Index>(in_sample.days.size());
  OmegaSet omega;
  omega.levels = in_sample.levels;
  omega.accepted.resize(n);
  Vector r(days), q(days);
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < days; ++t) r(t) = returns(i, in_sample.days[t]);
    for (Index k = 0; k < in_sample.levels_count(); ++k) {
      q = in_sample.values[k].row(i).transpose();
      const auto v = violations(r, q);
      const double tau = in_sample.levels[k];
      if (lr_uc(v, tau).accept(alpha) && lr_cc(v, tau).accept(alpha))
        omega.accepted[i].push_back(static_cast<int>(k));
    }
  }
  return omega;
}

std::vector<Index> filter_stocks(const OmegaSet& omega, int k0,
                                 const std::vector<std::string>& tickers) {
  if (k0 < 4) throw UsageError("K0 must be at least 4");
  std::vector<Index> keep;
  for (Index i = 0; i < omega.stocks(); ++i)
    if (omega.size(i) >= k0) keep.push_back(i);
  if (keep.empty()) {
    std::string report;
    for (Index i = 0; i < omega.stocks(); ++i) {
      const std::string name = i < static_cast<Index>(tickers.size()) ? tickers[i] : std::to_string(i);
      report += (i ? ", " : "") + name + "=" + std::to_string(omega.size(i));
    }
    throw PipelineError("no stock keeps at least K0=" + std::to_string(k0) +
                        " valid quantile levels (|omega|: " + report + ")");
  }
  return keep;
}

}  // namespace grace::diag
