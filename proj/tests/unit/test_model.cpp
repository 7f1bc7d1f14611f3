#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "grace/model/checkpoint.hpp"
#include "grace/model/ftgcn.hpp"
#include "test_util.hpp"

namespace grace::model {
namespace {

struct Fixture {
  graph::Hypergraph g;
  ModelDims dims;
  data::FeatureTensor x;
};

// N stocks in a ring under relation 0, every third pair under relation 1.
Fixture make_fixture(Index n, Index factors, Index relations, Index p, Index s, Index d,
                     bool with_factors, std::uint64_t seed) {
  std::vector<graph::StockEdge> edges;
  for (Index i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, 0});
  if (relations > 1)
    for (Index i = 0; i + 3 < n; i += 3) edges.push_back({i, i + 3, 1});
  Fixture f{graph::build_hypergraph(edges, n, factors, relations, with_factors), {}, {}};
  f.dims = dims_for(f.g, p, s, d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  f.x.entities = n + factors;
  f.x.features = p;
  for (Index k = 0; k < s; ++k)
    f.x.steps.push_back(Matrix::NullaryExpr(n + factors, p, [&] { return u(rng); }));
  return f;
}

ModelTheta zero_theta(const ModelDims& dims) {
  ModelTheta t = ModelTheta::initialize(dims, 0);
  for (Matrix* m : t.arrays()) m->setZero();
  return t;
}

TEST(Ftgcn, ZeroParametersGiveZeroOutput) {
  auto f = make_fixture(5, 2, 2, 3, 4, 4, true, 1);
  const ModelTheta theta = zero_theta(f.dims);
  EXPECT_EQ(model_forward_reference(f.x, f.g, theta).norm(), 0.0);
  EXPECT_EQ(Ftgcn(f.g, f.dims).predict(theta, f.x).norm(), 0.0);
}

TEST(Ftgcn, HeadBiasOnlyGivesConstant) {
  auto f = make_fixture(4, 2, 1, 3, 2, 3, true, 2);
  ModelTheta theta = ModelTheta::initialize(f.dims, 7);
  theta.head.weights.setZero();
  theta.head.bias(0, 0) = 0.25;
  const Vector out = Ftgcn(f.g, f.dims).predict(theta, f.x);
  for (Index i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out(i), 0.25);
}

// d = 1, P = 2, S = 1 unrolled by hand.
TEST(Ftgcn, SingleStepLstmMatchesHandUnrolled) {
  LstmParams p;
  p.input_weights.resize(4, 2);
  p.input_weights << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8;
  p.recurrent_weights = Matrix::Constant(4, 1, 9.0);  // h starts at 0
  p.bias.resize(1, 4);
  p.bias << 0.05, -0.05, 0.1, 0.2;
  Matrix x(2, 1);
  x << 0.3, 0.9;
  auto pre = [&](int k) { return p.input_weights(k, 0) * 0.3 + p.input_weights(k, 1) * 0.9 + p.bias(0, k); };
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  const double c = sig(pre(1)) * std::tanh(pre(0));  // forget gate meets c = 0
  const double h = sig(pre(3)) * std::tanh(c);
  EXPECT_NEAR(lstm_forward(x, p)(0), h, 1e-15);
}

TEST(Ftgcn, UniformAttentionOverAllOtherEntities) {
  auto f = make_fixture(3, 2, 1, 2, 2, 3, true, 3);
  TgcParams tgc{Matrix::Zero(1, f.dims.attention_width()), Matrix::Zero(1, 1)};
  const Matrix emb = Matrix::Random(5, 3);
  const Vector w = attention_weights(f.g, emb, 1, tgc);
  ASSERT_EQ(w.size(), 5);
  for (Index j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(w(j), j == 1 ? 0.0 : 0.25);
}

TEST(Ftgcn, AggregateOfZeroEmbeddingsIsZero) {
  auto f = make_fixture(3, 2, 1, 2, 2, 3, true, 3);
  const Vector w = Vector::Constant(5, 0.25);
  EXPECT_EQ(tgc_aggregate(f.g, Matrix::Zero(5, 3), w, 0).norm(), 0.0);
}

TEST(Ftgcn, TwoStockAggregate) {
  const auto g = graph::build_hypergraph({{0, 1, 0}}, 2, 0, 1, false);
  Matrix emb(2, 2);
  emb << 1, 2, 3, 4;
  Vector w(2);
  w << 0, 0.7;
  const Vector out = tgc_aggregate(g, emb, w, 0);
  EXPECT_DOUBLE_EQ(out(0), 0.7 * 3);
  EXPECT_DOUBLE_EQ(out(1), 0.7 * 4);
}

TEST(Ftgcn, BatchedForwardMatchesReference) {
  for (bool with_factors : {true, false}) {
    auto f = make_fixture(7, 3, 2, 4, 3, 5, with_factors, 4);
    const ModelTheta theta = ModelTheta::initialize(f.dims, 11);
    const Vector ref = model_forward_reference(f.x, f.g, theta);
    const Vector fast = Ftgcn(f.g, f.dims).predict(theta, f.x);
    EXPECT_LT((ref - fast).cwiseAbs().maxCoeff(), 1e-12) << "with_factors=" << with_factors;
  }
}

TEST(Ftgcn, ForwardIsDeterministic) {
  auto f = make_fixture(6, 2, 2, 3, 3, 4, true, 5);
  const ModelTheta theta = ModelTheta::initialize(f.dims, 3);
  const Ftgcn net(f.g, f.dims);
  const Vector a = net.predict(theta, f.x), b = net.predict(theta, f.x);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Ftgcn, FactorFeaturesIgnoredWithoutFactorVertices) {
  auto f = make_fixture(5, 2, 1, 3, 2, 4, false, 6);
  const ModelTheta theta = ModelTheta::initialize(f.dims, 1);
  const Ftgcn net(f.g, f.dims);
  const Vector before = net.predict(theta, f.x);
  for (auto& step : f.x.steps) step.bottomRows(2).setConstant(0.9);
  EXPECT_EQ(before, net.predict(theta, f.x));
}

// Relabelling stocks (with the relations) permutes the outputs.
TEST(Ftgcn, StockPermutationEquivariance) {
  const Index n = 5, factors = 2;
  std::vector<graph::StockEdge> edges{{0, 1, 0}, {1, 2, 0}, {3, 4, 0}, {0, 4, 1}};
  const std::vector<Index> perm{3, 0, 4, 1, 2};  // old i -> new perm[i]
  std::vector<graph::StockEdge> moved;
  for (const auto& e : edges) moved.push_back({perm[e.i], perm[e.j], e.relation});
  const auto g1 = graph::build_hypergraph(edges, n, factors, 2, true);
  const auto g2 = graph::build_hypergraph(moved, n, factors, 2, true);
  const auto dims = dims_for(g1, 3, 3, 4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  data::FeatureTensor x1{n + factors, 3, {}}, x2{n + factors, 3, {}};
  for (int s = 0; s < 3; ++s) {
    Matrix a = Matrix::NullaryExpr(n + factors, 3, [&] { return u(rng); });
    Matrix b = a;
    for (Index i = 0; i < n; ++i) b.row(perm[i]) = a.row(i);
    x1.steps.push_back(a);
    x2.steps.push_back(b);
  }
  const ModelTheta theta = ModelTheta::initialize(dims, 2);
  const Vector y1 = Ftgcn(g1, dims).predict(theta, x1);
  const Vector y2 = Ftgcn(g2, dims).predict(theta, x2);
  for (Index i = 0; i < n; ++i) EXPECT_NEAR(y2(perm[i]), y1(i), 1e-13);
}

// Gradients of the mean output per parameter group against central
// differences; biases are randomized so every gate path is exercised.
TEST(Ftgcn, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto f = make_fixture(6, 2, 2, 4, 4, 8, true, 100 + seed);
    ModelTheta theta = ModelTheta::initialize(f.dims, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    theta.lstm.bias = Matrix::NullaryExpr(1, theta.lstm.bias.cols(), [&] { return u(rng); });
    theta.tgc.bias(0, 0) = u(rng);
    const Ftgcn net(f.g, f.dims);
    std::vector<Matrix> params;
    for (const Matrix* m : theta.arrays()) params.push_back(*m);
    auto build = [&](ad::Tape& tape, const std::vector<Matrix>& p) {
      ModelTheta t = theta;
      auto arrays = t.arrays();
      for (std::size_t k = 0; k < arrays.size(); ++k) *arrays[k] = p[k];
      return ad::mean(net.forward(tape, net.bind(tape, t, true), f.x));
    };
    EXPECT_LT(testutil::max_gradient_error(build, params, 1e-6, 1e-6), 1e-4) << "seed " << seed;
  }
}

TEST(Ftgcn, RejectsMismatchedInput) {
  auto f = make_fixture(4, 2, 1, 3, 2, 4, true, 1);
  const ModelTheta theta = ModelTheta::initialize(f.dims, 1);
  f.x.steps.pop_back();
  EXPECT_THROW(Ftgcn(f.g, f.dims).predict(theta, f.x), Error);
  ModelTheta bad = theta;
  bad.head.weights.resize(1, 3);
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto f = make_fixture(4, 2, 1, 3, 2, 4, true, 1);
  const ModelTheta theta = ModelTheta::initialize(f.dims, 77);
  CheckpointMeta meta{"grace1", "tau", 0.25, 77, "config_hash=abc seed=77"};
  std::stringstream buf;
  write_checkpoint(buf, theta, meta);
  const auto back = read_checkpoint(buf, "mem");
  EXPECT_EQ(back.meta.method, "grace1");
  EXPECT_EQ(back.meta.level, 0.25);
  EXPECT_EQ(back.meta.seed, 77u);
  EXPECT_TRUE(back.theta.dims == theta.dims);
  const auto a = theta.arrays();
  const auto b = back.theta.arrays();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k], *b[k]);
  EXPECT_EQ(checkpoint_name("tau", 0.25), "model_tau_" + level_tag(0.25) + ".ckpt");
  EXPECT_EQ(checkpoint_name("mean", 0), "model_mean.ckpt");
}

TEST(Checkpoint, CorruptInputThrows) {
  std::istringstream bad("NOT A CHECKPOINT\n");
  EXPECT_THROW(read_checkpoint(bad, "mem"), LoadError);
}

}  // namespace
}  // namespace grace::model
