#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grace/data/panels.hpp"
#include "grace/graph/hypergraph.hpp"

namespace grace::synth {

// Normal mixture innovation, standardized to mean 0 and variance 1 internally.
struct Innovation {
  std::vector<double> weights{1.0};
  std::vector<double> means{0.0};
  std::vector<double> scales{1.0};

  static Innovation normal() { return {}; }
  void validate() const;
};

struct StandardizedMoments {
  double skewness = 0;
  double kurtosis = 3;
};

StandardizedMoments mixture_moments(const std::vector<double>& weights,
                                    const std::vector<double>& means,
                                    const std::vector<double>& scales);

// Mean shift driven by the stock's own trailing average return over `window`
// days (through t-1), so it stays visible after per-stock feature scaling.
// trend: +amplitude when the average is positive, -amplitude otherwise.
// magnitude: +amplitude when |average| exceeds its unconditional median,
// -amplitude otherwise; even in the average, so no linear model sees it.
struct MeanSignal {
  enum class Kind { none, trend, magnitude };
  Kind kind = Kind::none;
  Index window = 10;
  double amplitude = 0;
};

MeanSignal::Kind parse_signal_kind(const std::string& name);
std::string signal_kind_name(MeanSignal::Kind kind);

struct DgpSpec {
  Index stocks = 20;
  Index factors = 5;
  Index days = 900;
  std::uint64_t seed = 0;
  std::string start_date = "2010-01-04";

  Vector mean;           // per stock, daily
  Matrix loadings;       // stocks x factors
  Vector omega, a, b;    // GARCH(1,1) per stock
  Vector factor_mean;    // per factor
  Vector factor_sd;      // per factor
  double risk_free = 0;  // daily
  Innovation innovation;
  MeanSignal signal;

  std::vector<graph::StockEdge> edges;
  std::vector<std::string> relation_names;

  // Default market: common GARCH volatility, a market factor plus one of four
  // sector factors per stock, a sector relation, and two mean groups 3 bps
  // apart assigned by `kind`.
  static DgpSpec standard(Index stocks, Index days, std::uint64_t seed,
                          MeanSignal::Kind kind = MeanSignal::Kind::trend);
  void validate() const;
};

// h_{t+1} = omega + a eps_t^2 + b h_t.
inline double garch_next(double omega, double a, double b, double eps, double h) {
  return omega + a * eps * eps + b * h;
}

struct SyntheticDataset {
  DgpSpec spec;
  data::PricePanel prices;
  data::FactorPanel factors;
  Matrix garch_h;                // idiosyncratic variance, stocks x days
  Matrix group;                  // +1 / -1 mean group per stock and day, 0 without a signal
  Matrix mu, h, s, k;            // true conditional moments of r_{i,t}, stocks x days
  StandardizedMoments innovation_moments;

  // Exact conditional quantile of r_{i,t}.
  double true_quantile(Index stock, Index day, double tau) const;
  // Conditional CDF of r_{i,t}.
  double true_cdf(Index stock, Index day, double x) const;
};

SyntheticDataset generate(const DgpSpec& spec);

// Quantile of the standardized innovation.
double innovation_quantile(const Innovation& law, double tau);
double innovation_cdf(const Innovation& law, double x);

// prices.csv, factors.csv, relations.csv, relations_meta.csv and
// truth_moments.csv. `header` (without '#') is written as the first line.
void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir,
                   const std::string& header);

std::vector<std::string> business_days(const std::string& start, Index count);

}  // namespace grace::synth
