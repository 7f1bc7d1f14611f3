#include "grace/backtest/measures.hpp"

#include <cmath>
#include <sstream>

namespace grace::backtest {

std::string measure_name(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::M: return "M";
    case MeasureKind::MV: return "MV";
    case MeasureKind::MVSK: return "MVSK";
    case MeasureKind::SR: return "SR";
    case MeasureKind::SRSK: return "SRSK";
  }
  return "?";
}

MeasureKind parse_measure(const std::string& name) {
  for (MeasureKind k : kAllMeasures)
    if (measure_name(k) == name) return k;
  throw UsageError("unknown performance measure '" + name + "' (expected M, MV, MVSK, SR, SRSK)");
}

std::vector<MeasureKind> parse_measures(const std::string& list) {
  std::vector<MeasureKind> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_measure(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw UsageError("empty measure list");
  return out;
}

std::optional<double> compute_measure(const MeasureSpec& spec, double mu, double h, double s,
                                      double k) {
  switch (spec.kind) {
    case MeasureKind::M: return mu;
    case MeasureKind::MV: return mu - spec.lambda1 * h;
    case MeasureKind::MVSK: return mu - spec.lambda1 * h + spec.lambda2 * s - spec.lambda3 * k;
    case MeasureKind::SR:
      if (!(h > 0)) return std::nullopt;
      return mu / std::sqrt(h);
    case MeasureKind::SRSK:
      if (!(h > 0)) return std::nullopt;
      return mu / std::sqrt(h) + spec.lambda2 * s - spec.lambda3 * k;
  }
  return std::nullopt;
}

}  // namespace grace::backtest
