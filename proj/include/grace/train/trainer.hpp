#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grace/model/ftgcn.hpp"

namespace grace::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double penalty = 0.1;  // lambda* of the order-preserving penalty
  Index lags = 16;
  Index hidden = 64;
  int max_epochs = 200;
  int patience = 5;
  std::uint64_t seed = 0;
  // Fit against returns divided by their training-span standard deviation and
  // fold that scale into the output layer afterwards. Both losses are scale
  // equivariant, so only Adam's step geometry changes: daily returns are two
  // orders of magnitude below the output scale of a freshly initialized head.
  bool standardize_targets = true;

  void validate() const;
};

// Training-span scale of the returns (pooled sample sd over stocks and days).
double target_scale(const Matrix& returns, const std::vector<Index>& days, Index stocks);

// Multiplies the output layer by `scale`: predictions in units of r/scale
// become predictions in units of r.
model::ModelTheta rescale_output(model::ModelTheta theta, double scale);

struct Target {
  enum class Kind { Quantile, Mean };
  Kind kind = Kind::Mean;
  double tau = 0.5;

  static Target quantile(double tau);
  static Target mean() { return Target{}; }
  bool is_mean() const { return kind == Kind::Mean; }
  std::string label() const;
};

// tau_k = k / (K + 1), k = 1..K.
std::vector<double> quantile_levels(int count);

// Target days for each split; day t pairs X_{t-1} with r_{., t}.
struct TrainingData {
  const data::FeaturePanel* features = nullptr;
  const Matrix* returns = nullptr;  // stocks x days
  std::vector<Index> train_days;
  std::vector<Index> valid_days;
};

TrainingData make_training_data(const data::FeaturePanel& features, const Matrix& returns,
                                Index lags, const data::SplitSpec& split);

class EarlyStopper {
public:
  explicit EarlyStopper(int patience);

  // Records one epoch's validation error; returns true if it is a new best.
  bool observe(int epoch, double valid_error, const model::ModelTheta& theta);
  bool should_stop() const { return since_best_ >= patience_; }

  double best_error() const { return best_error_; }
  int best_epoch() const { return best_epoch_; }
  const model::ModelTheta& best_theta() const { return best_; }
  int epochs_since_best() const { return since_best_; }

private:
  int patience_;
  int since_best_ = 0;
  int best_epoch_ = 0;
  double best_error_;
  model::ModelTheta best_;
};

struct LogRow {
  int epoch = 0;
  double train_loss = 0;
  double valid_loss = 0;
};

struct TrainResult {
  model::ModelTheta theta;
  std::vector<LogRow> log;
  int best_epoch = 0;
  double best_valid = 0;
};

// Average objective of `theta` over `days`.
double evaluate(const model::Ftgcn& net, const model::ModelTheta& theta, const TrainingData& data,
                const std::vector<Index>& days, const Target& target, double penalty);

// Adam on cross-sectional minibatches (one day, all stocks), a shuffled pass
// over the training days per epoch, early stopping on the validation error.
TrainResult train(const graph::Hypergraph& g, const TrainingData& data, const Target& target,
                  const TrainConfig& cfg,
                  const std::function<void(const LogRow&)>& on_epoch = {});

// Model outputs for every stock on each of `days`: stocks x |days|.
Matrix predict_days(const model::Ftgcn& net, const model::ModelTheta& theta,
                    const data::FeaturePanel& features, const std::vector<Index>& days);

struct QuantilePanel {
  std::vector<double> levels;
  std::vector<Index> days;
  std::vector<Matrix> values;  // per level, stocks x |days|

  Index stocks() const { return values.empty() ? 0 : values.front().rows(); }
  Index levels_count() const { return static_cast<Index>(levels.size()); }
  double operator()(Index stock, Index day, Index level) const { return values[level](stock, day); }
};

QuantilePanel predict_panel(const model::Ftgcn& net, const std::vector<double>& levels,
                            const std::map<double, model::ModelTheta>& thetas,
                            const data::FeaturePanel& features, const std::vector<Index>& days);

}  // namespace grace::train
