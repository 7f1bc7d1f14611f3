#include "grace/data/features.hpp"

#include <algorithm>

#include "grace/core/least_squares.hpp"

namespace grace::data {

int FeatureLayout::max_window() const {
  if (windows.empty()) throw UsageError("feature layout: no moving-average windows");
  return *std::max_element(windows.begin(), windows.end());
}

void SplitSpec::validate(Index days) const {
  if (!(0 < train_end && train_end < valid_end && valid_end < test_end && test_end <= days))
    throw UsageError("split: need 0 < train_end < valid_end < test_end <= " + std::to_string(days) +
                     ", got " + std::to_string(train_end) + "/" + std::to_string(valid_end) + "/" +
                     std::to_string(test_end));
}

double moving_average(const PricePanel& panel, int k, Index stock, Index day) {
  return moving_average(panel.returns.row(stock).transpose(), k, day);
}

namespace {

Matrix exposure_design(const FactorPanel& factors, Index day, int window) {
  Matrix design(window, factors.factors() + 1);
  design.col(0).setOnes();
  design.rightCols(factors.factors()) =
      factors.values.middleCols(day + 1 - window, window).transpose();
  return design;
}

void check_alignment(const PricePanel& panel, const FactorPanel& factors) {
  require_shape(panel.days() == factors.days(),
                "features: price panel has " + std::to_string(panel.days()) +
                    " days but factor panel has " + std::to_string(factors.days()));
}

}  // namespace

Vector rolling_factor_exposures(const PricePanel& panel, const FactorPanel& factors, Index stock,
                                Index day, int window) {
  check_alignment(panel, factors);
  if (window < 20) throw UsageError("rolling_factor_exposures: window must be at least 20 days");
  if (day + 1 < window)
    throw HistoryError("rolling_factor_exposures: day " + std::to_string(day) +
                       " has fewer than " + std::to_string(window) + " days of history");
  const NormalEquations<double> normal(exposure_design(factors, day, window));
  const Vector coef = normal.solve(panel.returns.row(stock).segment(day + 1 - window, window).transpose());
  return coef.tail(factors.factors());
}

Matrix FeatureTensor::entity_block(Index entity) const {
  Matrix block(features, lags());
  for (Index s = 0; s < lags(); ++s) block.col(s) = steps[s].row(entity).transpose();
  return block;
}

Matrix raw_feature_frame(const PricePanel& panel, const FactorPanel& factors, Index day,
                         const FeatureLayout& layout) {
  check_alignment(panel, factors);
  const Index n = panel.stocks();
  const Index b_count = factors.factors();
  const Index windows = static_cast<Index>(layout.windows.size());
  if (day < layout.first_valid_day())
    throw HistoryError("features: day " + std::to_string(day) + " precedes the first usable day " +
                       std::to_string(layout.first_valid_day()));

  Matrix frame = Matrix::Zero(n + b_count, windows + b_count);
  for (Index i = 0; i < n; ++i) {
    for (Index w = 0; w < windows; ++w)
      frame(i, w) = moving_average(panel, layout.windows[w], i, day);
    // A singular window falls back to the latest earlier window that solves.
    for (Index u = day; u + 1 >= layout.exposure_window; --u) {
      try {
        frame.row(i).tail(b_count) =
            rolling_factor_exposures(panel, factors, i, u, layout.exposure_window).transpose();
        break;
      } catch (const SingularityError&) {
        if (u + 1 == layout.exposure_window) throw;
      }
    }
  }
  for (Index b = 0; b < b_count; ++b) {
    const Vector series = factors.values.row(b).transpose();
    for (Index w = 0; w < windows; ++w)
      frame(n + b, w) = moving_average(series, layout.windows[w], day);
    frame(n + b, windows + b) = 1.0;
  }
  return frame;
}

FeatureTensor build_feature_tensor(const PricePanel& panel, const FactorPanel& factors, Index t,
                                   Index lags, const FeatureLayout& layout) {
  if (lags < 1) throw UsageError("build_feature_tensor: need at least one lag");
  const Index earliest = layout.first_valid_day() + lags;
  if (t < earliest)
    throw HistoryError("build_feature_tensor: insufficient history for t=" + std::to_string(t) +
                       "; earliest usable t is " + std::to_string(earliest));
  FeatureTensor x;
  x.entities = panel.stocks() + factors.factors();
  x.features = static_cast<Index>(layout.windows.size()) + factors.factors();
  for (Index s = 0; s < lags; ++s) x.steps.push_back(raw_feature_frame(panel, factors, t - lags + s, layout));
  return x;
}

NormalizationStats normalization_stats(const std::vector<Matrix>& frames, Index first_day,
                                       Index end_day) {
  if (first_day >= end_day || end_day > static_cast<Index>(frames.size()))
    throw UsageError("normalization_stats: empty or out-of-range training span");
  NormalizationStats stats;
  stats.min = frames[first_day];
  stats.max = frames[first_day];
  for (Index u = first_day + 1; u < end_day; ++u) {
    stats.min = stats.min.cwiseMin(frames[u]);
    stats.max = stats.max.cwiseMax(frames[u]);
  }
  stats.zero_range = (stats.max - stats.min).array() <= 0.0;
  return stats;
}

Matrix normalize_frame(const Matrix& frame, const NormalizationStats& stats) {
  require_shape(frame.rows() == stats.min.rows() && frame.cols() == stats.min.cols(),
                "normalize_frame: frame does not match statistics");
  Matrix out(frame.rows(), frame.cols());
  for (Index j = 0; j < frame.cols(); ++j)
    for (Index i = 0; i < frame.rows(); ++i)
      out(i, j) = stats.zero_range(i, j) ? 0.0 : normalize(frame(i, j), stats.min(i, j), stats.max(i, j));
  return out;
}

FeatureTensor FeaturePanel::slice(Index t, Index lags) const {
  if (lags < 1) throw UsageError("feature slice: need at least one lag");
  if (t < first_target_day(lags) || t > days())
    throw HistoryError("feature slice: t=" + std::to_string(t) + " outside [" +
                       std::to_string(first_target_day(lags)) + ", " + std::to_string(days()) + "]");
  FeatureTensor x;
  x.entities = entities();
  x.features = features();
  x.steps.assign(frames.begin() + (t - lags), frames.begin() + t);
  return x;
}

FeaturePanel build_feature_panel(const PricePanel& panel, const FactorPanel& factors,
                                 Index train_end, const FeatureLayout& layout) {
  check_alignment(panel, factors);
  const Index n = panel.stocks();
  const Index b_count = factors.factors();
  const Index days = panel.days();
  const Index windows = static_cast<Index>(layout.windows.size());
  const Index first = layout.first_valid_day();
  if (first >= days) throw HistoryError("features: panel shorter than the feature history");
  if (train_end <= first)
    throw HistoryError("features: training span ends before the first usable day " +
                       std::to_string(first));

  FeaturePanel out;
  out.stocks = n;
  out.factors = b_count;
  out.layout = layout;
  out.first_valid = first;
  out.frames.assign(days, Matrix::Zero(n + b_count, windows + b_count));

  Matrix series(n + b_count, days);
  series.topRows(n) = panel.returns;
  series.bottomRows(b_count) = factors.values;

  Matrix last_exposure = Matrix::Zero(n, b_count);
  for (Index u = first; u < days; ++u) {
    Matrix& frame = out.frames[u];
    for (Index w = 0; w < windows; ++w) {
      const int k = layout.windows[w];
      for (Index e = 0; e < n + b_count; ++e)
        frame(e, w) = moving_average(series.row(e).transpose(), k, u);
    }
    bool singular = false;
    NormalEquations<double> normal;
    try {
      normal = NormalEquations<double>(exposure_design(factors, u, layout.exposure_window));
    } catch (const SingularityError&) {
      singular = true;
      out.warnings.push_back("singular exposure window ending " + panel.dates[u] +
                             "; previous exposures reused");
    }
    for (Index i = 0; i < n; ++i) {
      if (!singular) {
        const Vector coef = normal.solve(
            panel.returns.row(i).segment(u + 1 - layout.exposure_window, layout.exposure_window).transpose());
        last_exposure.row(i) = coef.tail(b_count).transpose();
      }
      frame.block(i, windows, 1, b_count) = last_exposure.row(i);
    }
    for (Index b = 0; b < b_count; ++b) frame(n + b, windows + b) = 1.0;
  }

  out.stats = normalization_stats(out.frames, first, std::min(train_end, days));
  for (Index e = 0; e < n + b_count; ++e)
    for (Index p = 0; p < windows + b_count; ++p)
      if (out.stats.zero_range(e, p))
        out.warnings.push_back("feature row (entity " + std::to_string(e) + ", feature " +
                               std::to_string(p) + ") has zero training range; set to 0");
  for (Index u = first; u < days; ++u) out.frames[u] = normalize_frame(out.frames[u], out.stats);
  return out;
}

}  // namespace grace::data
