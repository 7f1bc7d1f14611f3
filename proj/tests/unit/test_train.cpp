#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "grace/synth/dgp.hpp"
#include "grace/train/losses.hpp"
#include "grace/train/trainer.hpp"
#include "test_util.hpp"

namespace grace::train {
namespace {

TEST(Losses, PinballAtMedianIsHalfAbsolute) {
  Vector r(2), p(2);
  r << 2, -2;
  p << 0, 0;
  EXPECT_DOUBLE_EQ(quantile_loss(r, p, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(quantile_loss(r, r, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(pinball(-1.0, 0.1), 0.9);
  EXPECT_DOUBLE_EQ(pinball(1.0, 0.1), 0.1);
  EXPECT_THROW(quantile_loss(r, p, 1.0), UsageError);
}

TEST(Losses, PlsTwoStockExample) {
  Vector r(2), p(2);
  r << 1, 0;
  p << 0, 1;
  // MSE (1 + 1) / 2 plus (1/4) * two unit violations.
  EXPECT_DOUBLE_EQ(pls_loss(r, p, 1.0), 1.5);
  Vector co(2);
  co << 5, -3;
  EXPECT_DOUBLE_EQ(pls_loss(r, co, 1.0), pls_loss(r, co, 0.0));
}

// The tape losses equal the plain ones and differentiate correctly.
TEST(Losses, TapeVersionsMatchAndDifferentiate) {
  Vector r(4);
  r << 0.3, -0.1, 0.7, 0.2;
  Matrix p0(4, 1);
  p0 << 0.1, 0.05, -0.2, 0.4;
  ad::Tape tape;
  const auto q = quantile_loss(tape.parameter(p0), r, 0.2);
  EXPECT_NEAR(q.value()(0, 0), quantile_loss(r, Vector(p0), 0.2), 1e-15);
  const auto m = pls_loss(tape.constant(p0), r, 0.1);
  EXPECT_NEAR(m.value()(0, 0), pls_loss(r, Vector(p0), 0.1), 1e-15);
  auto build_q = [&](ad::Tape& t, const std::vector<Matrix>& p) {
    return quantile_loss(t.parameter(p[0]), r, 0.2);
  };
  auto build_m = [&](ad::Tape& t, const std::vector<Matrix>& p) {
    return pls_loss(t.parameter(p[0]), r, 0.1);
  };
  EXPECT_LT(testutil::max_gradient_error(build_q, {p0}), 1e-6);
  EXPECT_LT(testutil::max_gradient_error(build_m, {p0}), 1e-6);
}

TEST(Levels, EquallySpaced) {
  EXPECT_EQ(quantile_levels(3), (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_EQ(quantile_levels(199).size(), 199u);
  EXPECT_DOUBLE_EQ(quantile_levels(199).front(), 0.005);
}

TEST(EarlyStopping, StopsAfterPatienceAndKeepsBest) {
  EarlyStopper stopper(1);
  model::ModelTheta first, second;
  first.head.bias = Matrix::Constant(1, 1, 1.0);
  second.head.bias = Matrix::Constant(1, 1, 2.0);
  EXPECT_TRUE(stopper.observe(1, 0.5, first));
  EXPECT_FALSE(stopper.should_stop());
  EXPECT_FALSE(stopper.observe(2, 0.6, second));
  EXPECT_TRUE(stopper.should_stop());
  EXPECT_EQ(stopper.best_epoch(), 1);
  EXPECT_EQ(stopper.best_theta().head.bias(0, 0), 1.0);
}

struct SmallMarket {
  synth::SyntheticDataset ds;
  graph::Hypergraph g;
  data::FeaturePanel features;
  TrainingData data;
};

// With `ar` set, returns are replaced by r_t = ar r_{t-1} + noise, which is
// linear in the one-day moving-average feature.
SmallMarket small_market(std::uint64_t seed, double ar = 0) {
  SmallMarket m;
  m.ds = synth::generate(synth::DgpSpec::standard(10, 260, seed));
  if (ar != 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 0.01);
    Matrix& r = m.ds.prices.returns;
    for (Index i = 0; i < r.rows(); ++i) {
      r(i, 0) = z(rng);
      for (Index t = 1; t < r.cols(); ++t) r(i, t) = ar * r(i, t - 1) + z(rng);
    }
  }
  m.g = graph::build_hypergraph(m.ds.spec.edges, 10, 5, 1, true, m.ds.spec.relation_names);
  data::FeatureLayout layout;
  layout.exposure_window = 40;
  const data::SplitSpec split{200, 230, 260};
  m.features = data::build_feature_panel(m.ds.prices, m.ds.factors, split.train_end, layout);
  m.data = make_training_data(m.features, m.ds.prices.returns, 4, split);
  return m;
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.lags = 4;
  c.hidden = 4;
  c.max_epochs = 5;
  c.patience = 5;
  c.seed = seed;
  return c;
}

TEST(Trainer, SplitDaysArePartitioned) {
  const auto m = small_market(1);
  EXPECT_EQ(m.data.train_days.front(), m.features.first_target_day(4));
  EXPECT_EQ(m.data.train_days.back(), 199);
  EXPECT_EQ(m.data.valid_days.front(), 200);
  EXPECT_EQ(m.data.valid_days.back(), 229);
}

TEST(Trainer, MedianLossDecreasesOverFirstEpochs) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = small_market(seed, 0.6);
    const auto result = train(m.g, m.data, Target::quantile(0.5), small_config(seed));
    ASSERT_EQ(result.log.size(), 5u);
    for (std::size_t e = 1; e < result.log.size(); ++e)
      EXPECT_LT(result.log[e].train_loss, result.log[e - 1].train_loss)
          << "seed " << seed << " epoch " << e + 1;
  }
}

TEST(Trainer, SameSeedGivesIdenticalParameters) {
  const auto m = small_market(4);
  auto cfg = small_config(9);
  cfg.max_epochs = 2;
  const auto a = train(m.g, m.data, Target::mean(), cfg);
  const auto b = train(m.g, m.data, Target::mean(), cfg);
  const auto pa = a.theta.arrays();
  const auto pb = b.theta.arrays();
  for (std::size_t k = 0; k < pa.size(); ++k)
    EXPECT_EQ(std::memcmp(pa[k]->data(), pb[k]->data(), sizeof(double) * pa[k]->size()), 0);
}

TEST(Trainer, TargetScaleIsPooledSd) {
  Matrix r(2, 4);
  r << 1, 2, 3, 4, 5, 6, 7, 8;
  // Days 1 and 2: values 2, 3, 6, 7 with mean 4.5.
  const double sd = std::sqrt((6.25 + 2.25 + 2.25 + 6.25) / 3);
  EXPECT_NEAR(target_scale(r, {1, 2}, 2), sd, 1e-15);
  EXPECT_THROW(target_scale(Matrix::Ones(2, 4), {0, 1}, 2), Error);
}

TEST(Trainer, RescaledOutputScalesPredictions) {
  const auto m = small_market(5);
  const auto dims = model::dims_for(m.g, m.features.features(), 4, 3);
  const auto theta = model::ModelTheta::initialize(dims, 1);
  const model::Ftgcn net(m.g, dims);
  const auto x = m.features.slice(210, 4);
  EXPECT_TRUE((net.predict(rescale_output(theta, 2.5), x)).isApprox(2.5 * net.predict(theta, x), 1e-13));
}

TEST(Trainer, InvalidConfigRejected) {
  auto c = small_config(1);
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config(1);
  c.patience = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

}  // namespace
}  // namespace grace::train
