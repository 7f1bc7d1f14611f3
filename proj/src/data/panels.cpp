#include "grace/data/panels.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "grace/data/csv.hpp"

namespace grace::data {

namespace {

std::string where(const std::string& source, const csv::Row& row) {
  return source + ":" + std::to_string(row.line);
}

const std::string& field(const csv::Row& row, int column, const std::string& source,
                         const char* name) {
  if (column >= static_cast<int>(row.fields.size()) || row.fields[column].empty())
    throw LoadError(where(source, row) + ": missing " + name + " cell");
  return row.fields[column];
}

}  // namespace

PricePanel parse_prices(std::istream& in, const std::string& source) {
  const csv::Table table = csv::read(in);
  const int date_col = table.require_column("date", source);
  const int ticker_col = table.require_column("ticker", source);
  int value_col = table.column("return");
  const bool from_close = value_col < 0;
  if (from_close) value_col = table.column("close");
  if (value_col < 0) throw LoadError(source + ": need a 'return' or 'close' column");

  // ticker -> (date, value) in file order
  std::map<std::string, std::vector<std::pair<std::string, double>>> series;
  std::set<std::pair<std::string, std::string>> seen;
  std::set<std::string> all_dates;
  for (const csv::Row& row : table.rows) {
    const std::string& date = field(row, date_col, source, "date");
    const std::string& ticker = field(row, ticker_col, source, "ticker");
    const double value =
        csv::parse_double(field(row, value_col, source, from_close ? "close" : "return"),
                          where(source, row));
    if (!seen.emplace(date, ticker).second)
      throw LoadError(where(source, row) + ": duplicate row for (" + date + ", " + ticker + ")");
    auto& s = series[ticker];
    if (!s.empty() && !(s.back().first < date))
      throw LoadError(where(source, row) + ": non-monotone dates for " + ticker + " (" + date +
                      " after " + s.back().first + ")");
    s.emplace_back(date, value);
    all_dates.insert(date);
  }
  if (series.empty()) throw LoadError(source + ": no data rows");

  PricePanel panel;
  std::vector<std::string> dates(all_dates.begin(), all_dates.end());
  std::vector<const std::vector<std::pair<std::string, double>>*> kept;
  for (const auto& [ticker, s] : series) {
    if (s.size() != dates.size()) {
      panel.warnings.push_back("dropped " + ticker + ": " + std::to_string(dates.size() - s.size()) +
                               " missing day(s)");
      continue;
    }
    panel.tickers.push_back(ticker);
    kept.push_back(&s);
  }
  if (kept.empty()) throw LoadError(source + ": no stock covers every date");

  const Index n = static_cast<Index>(kept.size());
  if (from_close) {
    if (dates.size() < 2) throw LoadError(source + ": need at least two closes per stock");
    panel.dates.assign(dates.begin() + 1, dates.end());
    panel.returns.resize(n, static_cast<Index>(panel.dates.size()));
    for (Index i = 0; i < n; ++i) {
      const auto& s = *kept[i];
      for (std::size_t t = 1; t < s.size(); ++t) {
        if (!(s[t - 1].second > 0))
          throw LoadError(source + ": non-positive close for " + panel.tickers[i] + " on " +
                          s[t - 1].first);
        panel.returns(i, static_cast<Index>(t - 1)) = s[t].second / s[t - 1].second - 1.0;
      }
    }
  } else {
    panel.dates = std::move(dates);
    panel.returns.resize(n, static_cast<Index>(panel.dates.size()));
    for (Index i = 0; i < n; ++i)
      for (std::size_t t = 0; t < kept[i]->size(); ++t)
        panel.returns(i, static_cast<Index>(t)) = (*kept[i])[t].second;
  }
  require_finite(panel.returns, source + " returns");
  return panel;
}

PricePanel load_prices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return parse_prices(in, path.string());
}

FactorPanel parse_factors(std::istream& in, const std::string& source,
                          const FactorColumns& columns) {
  const csv::Table table = csv::read(in);
  const int date_col = table.require_column("date", source);
  std::vector<int> factor_cols;
  for (const auto& name : columns.factors) factor_cols.push_back(table.require_column(name, source));
  const int rf_col = table.require_column(columns.risk_free, source);

  FactorPanel panel;
  panel.names = columns.factors;
  const Index t_count = static_cast<Index>(table.rows.size());
  panel.values.resize(static_cast<Index>(factor_cols.size()), t_count);
  panel.risk_free.resize(t_count);
  for (Index t = 0; t < t_count; ++t) {
    const csv::Row& row = table.rows[t];
    const std::string& date = field(row, date_col, source, "date");
    if (!panel.dates.empty() && !(panel.dates.back() < date))
      throw LoadError(where(source, row) + ": non-monotone date " + date);
    panel.dates.push_back(date);
    for (std::size_t b = 0; b < factor_cols.size(); ++b)
      panel.values(static_cast<Index>(b), t) = csv::parse_double(
          field(row, factor_cols[b], source, columns.factors[b].c_str()), where(source, row));
    panel.risk_free(t) =
        csv::parse_double(field(row, rf_col, source, "risk-free"), where(source, row));
  }
  return panel;
}

FactorPanel load_factors(const std::filesystem::path& path, const FactorColumns& columns) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return parse_factors(in, path.string(), columns);
}

FactorPanel align_factors(const FactorPanel& factors, const std::vector<std::string>& dates) {
  std::unordered_map<std::string, Index> index;
  for (std::size_t t = 0; t < factors.dates.size(); ++t) index[factors.dates[t]] = static_cast<Index>(t);
  FactorPanel out;
  out.names = factors.names;
  out.dates = dates;
  out.values.resize(factors.factors(), static_cast<Index>(dates.size()));
  out.risk_free.resize(static_cast<Index>(dates.size()));
  for (std::size_t t = 0; t < dates.size(); ++t) {
    const auto it = index.find(dates[t]);
    if (it == index.end()) throw LoadError("factor panel has no row for " + dates[t]);
    out.values.col(static_cast<Index>(t)) = factors.values.col(it->second);
    out.risk_free(static_cast<Index>(t)) = factors.risk_free(it->second);
  }
  return out;
}

}  // namespace grace::data
