#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "grace/core/types.hpp"

namespace grace::backtest {

enum class MeasureKind { M, MV, MVSK, SR, SRSK };
inline constexpr std::array<MeasureKind, 5> kAllMeasures{MeasureKind::M, MeasureKind::MV,
                                                         MeasureKind::MVSK, MeasureKind::SR,
                                                         MeasureKind::SRSK};

std::string measure_name(MeasureKind kind);
MeasureKind parse_measure(const std::string& name);
// Comma-separated list such as "M,SR,SRSK".
std::vector<MeasureKind> parse_measures(const std::string& list);

struct MeasureSpec {
  MeasureKind kind = MeasureKind::M;
  double lambda1 = 0;
  double lambda2 = 0;
  double lambda3 = 0;
};

// M = mu; MV = mu - l1 h; MVSK = mu - l1 h + l2 s - l3 k; SR = mu / sqrt(h);
// SRSK = mu / sqrt(h) + l2 s - l3 k. Empty when a ratio measure meets h <= 0.
std::optional<double> compute_measure(const MeasureSpec& spec, double mu, double h, double s,
                                      double k);

}  // namespace grace::backtest
