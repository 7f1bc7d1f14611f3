#include "grace/train/trainer.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "grace/core/adam.hpp"
#include "grace/model/checkpoint.hpp"
#include "grace/train/losses.hpp"

namespace grace::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw UsageError("learning rate must be positive");
  if (!(penalty >= 0)) throw UsageError("penalty lambda* must be nonnegative");
  if (lags < 1 || hidden < 1) throw UsageError("lags and hidden width must be positive");
  if (max_epochs < 1) throw UsageError("max_epochs must be at least 1");
  if (patience < 1) throw UsageError("patience must be at least 1");
}

Target Target::quantile(double tau) {
  require_level(tau);
  return Target{Kind::Quantile, tau};
}

std::string Target::label() const {
  return is_mean() ? std::string("mean") : "tau=" + model::level_tag(tau);
}

std::vector<double> quantile_levels(int count) {
  if (count < 1) throw UsageError("need at least one quantile level");
  std::vector<double> levels(count);
  for (int k = 1; k <= count; ++k) levels[k - 1] = static_cast<double>(k) / (count + 1);
  return levels;
}

TrainingData make_training_data(const data::FeaturePanel& features, const Matrix& returns,
                                Index lags, const data::SplitSpec& split) {
  split.validate(returns.cols());
  require_shape(features.days() == returns.cols() && features.stocks == returns.rows(),
                "training data: features cover " + std::to_string(features.stocks) + " stocks x " +
                    std::to_string(features.days()) + " days, returns are " +
                    shape_str(returns.rows(), returns.cols()));
  const Index first = features.first_target_day(lags);
  if (first >= split.train_end)
    throw HistoryError("training span ends at day " + std::to_string(split.train_end) +
                       " but the first usable target day is " + std::to_string(first));
  TrainingData d;
  d.features = &features;
  d.returns = &returns;
  for (Index t = first; t < split.train_end; ++t) d.train_days.push_back(t);
  for (Index t = split.train_end; t < split.valid_end; ++t) d.valid_days.push_back(t);
  return d;
}

EarlyStopper::EarlyStopper(int patience)
    : patience_(patience), best_error_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw UsageError("patience must be at least 1");
}

bool EarlyStopper::observe(int epoch, double valid_error, const model::ModelTheta& theta) {
  if (valid_error < best_error_) {
    best_error_ = valid_error;
    best_epoch_ = epoch;
    best_ = theta;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double target_scale(const Matrix& returns, const std::vector<Index>& days, Index stocks) {
  const Index count = static_cast<Index>(days.size()) * stocks;
  if (count < 2) throw SampleSizeError("target scale needs at least two training returns");
  double sum = 0;
  for (Index t : days) sum += returns.col(t).head(stocks).sum();
  const double mean = sum / static_cast<double>(count);
  double ss = 0;
  for (Index t : days) ss += (returns.col(t).head(stocks).array() - mean).square().sum();
  const double var = ss / static_cast<double>(count - 1);
  if (!(var > 0)) throw NumericError("training returns have zero variance");
  return std::sqrt(var);
}

model::ModelTheta rescale_output(model::ModelTheta theta, double scale) {
  theta.head.weights *= scale;
  theta.head.bias *= scale;
  return theta;
}

namespace {

double day_loss(const Vector& r, const Vector& pred, const Target& target, double penalty) {
  return target.is_mean() ? pls_loss(r, pred, penalty) : quantile_loss(r, pred, target.tau);
}

}  // namespace

double evaluate(const model::Ftgcn& net, const model::ModelTheta& theta, const TrainingData& data,
                const std::vector<Index>& days, const Target& target, double penalty) {
  if (days.empty()) throw UsageError("evaluate: no days");
  const Index n = net.dims().stocks;
  double total = 0;
  for (Index t : days) {
    const Vector pred = net.predict(theta, data.features->slice(t, net.dims().lags));
    total += day_loss(data.returns->col(t).head(n), pred, target, penalty);
  }
  return total / static_cast<double>(days.size());
}

TrainResult train(const graph::Hypergraph& g, const TrainingData& data, const Target& target,
                  const TrainConfig& cfg, const std::function<void(const LogRow&)>& on_epoch) {
  cfg.validate();
  if (data.train_days.empty() || data.valid_days.empty())
    throw UsageError("train: empty training or validation span");
  const model::ModelDims dims = model::dims_for(g, data.features->features(), cfg.lags, cfg.hidden);
  const model::Ftgcn net(g, dims);
  model::ModelTheta theta = model::ModelTheta::initialize(dims, cfg.seed);

  std::vector<AdamState<double>> adam(model::ModelTheta::kArrayCount);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order = data.train_days;
  EarlyStopper stopper(cfg.patience);
  TrainResult result;
  const double scale =
      cfg.standardize_targets ? target_scale(*data.returns, data.train_days, dims.stocks) : 1.0;
  // Reported losses are in return units; the PLS loss is quadratic in scale.
  const double loss_unit = target.is_mean() ? scale * scale : scale;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double running = 0;
    for (Index t : order) {
      try {
        ad::Tape tape;
        const auto bound = net.bind(tape, theta, true);
        const ad::Var pred = net.forward(tape, bound, data.features->slice(t, cfg.lags));
        const Vector r = data.returns->col(t).head(dims.stocks) / scale;
        const ad::Var loss = target.is_mean() ? pls_loss(pred, r, cfg.penalty)
                                              : quantile_loss(pred, r, target.tau);
        running += loss.value()(0, 0);
        const auto grads = tape.backward(loss);
        auto arrays = theta.arrays();
        for (std::size_t k = 0; k < arrays.size(); ++k)
          *arrays[k] += adam_step(adam[k], grads[k], cfg.learning_rate);
      } catch (const NumericError& e) {
        throw NumericError("training " + target.label() + " diverged at epoch " +
                           std::to_string(epoch) + " (day " + std::to_string(t) + "): " + e.what() +
                           "; try a smaller learning rate than " +
                           std::to_string(cfg.learning_rate));
      }
    }
    const model::ModelTheta current = rescale_output(theta, scale);
    LogRow row{epoch, loss_unit * running / static_cast<double>(order.size()),
               evaluate(net, current, data, data.valid_days, target, cfg.penalty)};
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    stopper.observe(epoch, row.valid_loss, current);
    if (stopper.should_stop()) break;
  }
  result.theta = stopper.best_theta();
  result.best_epoch = stopper.best_epoch();
  result.best_valid = stopper.best_error();
  return result;
}

Matrix predict_days(const model::Ftgcn& net, const model::ModelTheta& theta,
                    const data::FeaturePanel& features, const std::vector<Index>& days) {
  Matrix out(net.dims().stocks, static_cast<Index>(days.size()));
  for (std::size_t k = 0; k < days.size(); ++k)
    out.col(static_cast<Index>(k)) = net.predict(theta, features.slice(days[k], net.dims().lags));
  return out;
}

QuantilePanel predict_panel(const model::Ftgcn& net, const std::vector<double>& levels,
                            const std::map<double, model::ModelTheta>& thetas,
                            const data::FeaturePanel& features, const std::vector<Index>& days) {
  std::string missing;
  for (double tau : levels)
    if (!thetas.count(tau)) missing += (missing.empty() ? "" : ", ") + model::level_tag(tau);
  if (!missing.empty()) throw UsageError("no trained model for quantile levels: " + missing);
  QuantilePanel panel;
  panel.levels = levels;
  panel.days = days;
  for (double tau : levels) panel.values.push_back(predict_days(net, thetas.at(tau), features, days));
  return panel;
}

}  // namespace grace::train
