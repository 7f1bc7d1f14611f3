#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grace/data/features.hpp"
#include "grace/train/trainer.hpp"

namespace grace::baseline {

// pred_i = alpha + gamma sum_j w_ij r_{j,t-1} + zeta' x_{i,t-1} + varsigma' F_{t-1}.
struct LinearParams {
  double alpha = 0;
  double gamma = 0;
  Vector zeta;      // P
  Vector varsigma;  // B

  Index width() const { return 2 + zeta.size() + varsigma.size(); }
  Vector flat() const;
  static LinearParams from_flat(const Vector& v, Index features, Index factors);
};

template <typename Scalar>
Vec<Scalar> linear_forward(const LinearParams& p, const Mat<Scalar>& w, const Vec<Scalar>& lag_returns,
                           const Mat<Scalar>& features, const Vec<Scalar>& factors) {
  const Index n = lag_returns.size();
  require_shape(w.rows() == n && w.cols() == n, "linear_forward: adjacency must be N x N");
  require_shape(features.rows() == n && features.cols() == p.zeta.size(),
                "linear_forward: features are " + shape_str(features.rows(), features.cols()) +
                    ", expected " + shape_str(n, p.zeta.size()));
  require_shape(factors.size() == p.varsigma.size(), "linear_forward: factor count mismatch");
  Vec<Scalar> out = (w * lag_returns) * Scalar(p.gamma) + features * p.zeta.cast<Scalar>();
  out.array() += Scalar(p.alpha) + factors.dot(p.varsigma.cast<Scalar>());
  return out;
}

// Stacked regressors: one row per (day, stock) with columns
// [1, network lag, x_{i,t-1}, F_{t-1}] and the matching r_{i,t}.
struct LinearData {
  Matrix design;
  Vector response;
  Index features = 0;
  Index factors = 0;
};

LinearData linear_design(const data::FeaturePanel& features, const Matrix& returns,
                         const Matrix& factor_values, const Matrix& w, const std::vector<Index>& days);

struct LinearFitConfig {
  double learning_rate = 1e-3;
  int max_steps = 500;
  double gradient_tolerance = 1e-6;
};

struct LinearFit {
  LinearParams params;
  int steps = 0;
  double loss = 0;
  double gradient_norm = 0;
  std::vector<std::string> warnings;  // unidentified (zero-variance) regressors
};

// Full-batch Adam on the pinball loss (quantile target) or squared loss (mean).
LinearFit fit_linear(const train::Target& target, const LinearData& data, const LinearFitConfig& cfg);

// Stocks x |days| predictions.
Matrix linear_predict(const LinearParams& p, const data::FeaturePanel& features,
                      const Matrix& returns, const Matrix& factor_values, const Matrix& w,
                      const std::vector<Index>& days);

void save_linear(const std::filesystem::path& path, const LinearParams& p, const train::Target& target,
                 std::uint64_t seed, const std::string& provenance = {});
struct LinearCheckpoint {
  LinearParams params;
  train::Target target;
};
LinearCheckpoint load_linear(const std::filesystem::path& path);

}  // namespace grace::baseline
