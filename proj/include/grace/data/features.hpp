#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grace/core/types.hpp"
#include "grace/data/panels.hpp"

namespace grace::data {

struct FeatureLayout {
  std::vector<int> windows{1, 5, 10, 20, 30};
  int exposure_window = 126;  // half a trading year

  int max_window() const;
  // Earliest 0-based day whose feature frame is fully defined.
  Index first_valid_day() const { return std::max(max_window(), exposure_window) - 1; }
};

// Half-open day ranges [first_day, train_end), [train_end, valid_end),
// [valid_end, test_end) of target days.
struct SplitSpec {
  Index train_end = 0;
  Index valid_end = 0;
  Index test_end = 0;

  void validate(Index days) const;
};

// Mean of the k returns ending at `day` (0-based, inclusive).
template <typename Derived>
double moving_average(const Eigen::MatrixBase<Derived>& series, int k, Index day) {
  if (k < 1) throw UsageError("moving_average: window must be positive");
  if (day + 1 < k)
    throw HistoryError("moving_average: day " + std::to_string(day) + " has fewer than " +
                       std::to_string(k) + " returns of history");
  return series.segment(day + 1 - k, k).mean();
}

double moving_average(const PricePanel& panel, int k, Index stock, Index day);

// Slopes of stock returns on factor values over the `window` days ending at
// `day`, with an intercept that is fitted and discarded.
Vector rolling_factor_exposures(const PricePanel& panel, const FactorPanel& factors, Index stock,
                                Index day, int window);

// Lagged feature block X_{t-1}: entities (stocks then factors) x P x S.
// steps[s] holds the entities x P frame of day t - S + s.
struct FeatureTensor {
  Index entities = 0;
  Index features = 0;
  std::vector<Matrix> steps;

  Index lags() const { return static_cast<Index>(steps.size()); }
  double operator()(Index entity, Index feature, Index lag) const {
    return steps[lag](entity, feature);
  }
  // P x S block of one entity.
  Matrix entity_block(Index entity) const;
};

// Raw (unnormalized) feature frame of one day: entities x P.
Matrix raw_feature_frame(const PricePanel& panel, const FactorPanel& factors, Index day,
                         const FeatureLayout& layout = {});

// Raw X_{t-1} built from days t-S..t-1.
FeatureTensor build_feature_tensor(const PricePanel& panel, const FactorPanel& factors, Index t,
                                   Index lags, const FeatureLayout& layout = {});

struct NormalizationStats {
  Matrix min;  // entities x P
  Matrix max;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> zero_range;
};

inline double normalize(double value, double train_min, double train_max) {
  return (value - train_min) / (train_max - train_min);
}

// Per (entity, feature) min/max over frames of days [first_day, end_day).
NormalizationStats normalization_stats(const std::vector<Matrix>& frames, Index first_day,
                                       Index end_day);

// Applies the training range; rows with zero range become 0.
Matrix normalize_frame(const Matrix& frame, const NormalizationStats& stats);

// Normalized feature frames for every day, ready to be sliced into X_{t-1}.
struct FeaturePanel {
  Index stocks = 0;
  Index factors = 0;
  FeatureLayout layout;
  std::vector<Matrix> frames;  // per day, entities x P; zero before first_valid
  Index first_valid = 0;
  NormalizationStats stats;
  std::vector<std::string> warnings;

  Index entities() const { return stocks + factors; }
  Index features() const { return frames.empty() ? 0 : frames.front().cols(); }
  Index days() const { return static_cast<Index>(frames.size()); }
  // First target day t for which X_{t-1} with `lags` steps exists.
  Index first_target_day(Index lags) const { return first_valid + lags; }
  FeatureTensor slice(Index t, Index lags) const;
};

// Builds every day's frame, normalized with statistics from days < train_end.
// A singular exposure window reuses that stock's previous valid exposure.
FeaturePanel build_feature_panel(const PricePanel& panel, const FactorPanel& factors,
                                 Index train_end, const FeatureLayout& layout = {});

}  // namespace grace::data
