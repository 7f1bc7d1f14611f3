#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "grace/core/types.hpp"

namespace grace::data {

// Dense stock x day panel of one-day simple returns.
struct PricePanel {
  std::vector<std::string> tickers;  // lexicographic
  std::vector<std::string> dates;    // ISO-8601, strictly increasing
  Matrix returns;                    // stocks x days
  std::vector<std::string> warnings;

  Index stocks() const { return returns.rows(); }
  Index days() const { return returns.cols(); }
};

struct FactorPanel {
  std::vector<std::string> names;
  std::vector<std::string> dates;
  Matrix values;     // factors x days
  Vector risk_free;  // daily rate per day

  Index factors() const { return values.rows(); }
  Index days() const { return values.cols(); }
};

struct FactorColumns {
  std::vector<std::string> factors{"mkt_rf", "smb", "hml", "rmw", "cma"};
  std::string risk_free = "rf";
};

// Long-format `date,ticker,return` or `date,ticker,close`. Stocks missing any
// date are dropped (recorded in `warnings`); closes are turned into returns,
// which drops the first date.
PricePanel parse_prices(std::istream& in, const std::string& source);
PricePanel load_prices(const std::filesystem::path& path);

FactorPanel parse_factors(std::istream& in, const std::string& source,
                          const FactorColumns& columns = {});
FactorPanel load_factors(const std::filesystem::path& path, const FactorColumns& columns = {});

// Restricts a factor panel to `dates`; every date must be present.
FactorPanel align_factors(const FactorPanel& factors, const std::vector<std::string>& dates);

}  // namespace grace::data
