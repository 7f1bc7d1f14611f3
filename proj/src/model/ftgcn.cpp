#include "grace/model/ftgcn.hpp"

#include <random>

#include "grace/core/activations.hpp"

namespace grace::model {

namespace {

Matrix glorot(Index rows, Index cols, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

void expect_shape(const Matrix& m, Index rows, Index cols, const std::string& name) {
  require_shape(m.rows() == rows && m.cols() == cols, [&] {
    return "model parameter " + name + " is " + shape_str(m.rows(), m.cols()) + ", expected " +
           shape_str(rows, cols);
  });
}

}  // namespace

ModelTheta ModelTheta::initialize(const ModelDims& dims, std::uint64_t seed) {
  if (dims.stocks < 1 || dims.features < 1 || dims.lags < 1 || dims.hidden < 1)
    throw UsageError("model dimensions must be positive");
  std::mt19937_64 rng(seed);
  const Index d = dims.hidden;
  const Index p = dims.features;
  ModelTheta theta;
  theta.dims = dims;
  theta.lstm.input_weights = glorot(4 * d, p, double(p), double(d), rng);
  theta.lstm.recurrent_weights = glorot(4 * d, d, double(d), double(d), rng);
  theta.lstm.bias = Matrix::Zero(1, 4 * d);
  const Index width = dims.attention_width();
  theta.tgc.weights = glorot(1, width, double(width), 1.0, rng);
  theta.tgc.bias = Matrix::Zero(1, 1);
  theta.head.weights = glorot(1, 2 * d, double(2 * d), 1.0, rng);
  theta.head.bias = Matrix::Zero(1, 1);
  return theta;
}

std::vector<Matrix*> ModelTheta::arrays() {
  return {&lstm.input_weights, &lstm.recurrent_weights, &lstm.bias, &tgc.weights,
          &tgc.bias,           &head.weights,           &head.bias};
}

std::vector<const Matrix*> ModelTheta::arrays() const {
  return {&lstm.input_weights, &lstm.recurrent_weights, &lstm.bias, &tgc.weights,
          &tgc.bias,           &head.weights,           &head.bias};
}

const std::vector<std::string>& ModelTheta::array_names() {
  static const std::vector<std::string> names{"lstm_input",     "lstm_recurrent", "lstm_bias",
                                              "attention_w5",   "attention_b5",   "head_w6",
                                              "head_b6"};
  return names;
}

std::vector<std::pair<int, int>> ModelTheta::groups() { return {{0, 3}, {3, 5}, {5, 7}}; }

void ModelTheta::validate() const {
  const Index d = dims.hidden;
  expect_shape(lstm.input_weights, 4 * d, dims.features, "lstm_input");
  expect_shape(lstm.recurrent_weights, 4 * d, d, "lstm_recurrent");
  expect_shape(lstm.bias, 1, 4 * d, "lstm_bias");
  expect_shape(tgc.weights, 1, dims.attention_width(), "attention_w5");
  expect_shape(tgc.bias, 1, 1, "attention_b5");
  expect_shape(head.weights, 1, 2 * d, "head_w6");
  expect_shape(head.bias, 1, 1, "head_b6");
  for (const Matrix* m : arrays()) require_finite(*m, "model parameter");
}

ModelDims dims_for(const graph::Hypergraph& g, Index features, Index lags, Index hidden) {
  return ModelDims{g.stocks(), g.factors(), g.relations(), features, lags, hidden, g.include_factors()};
}

Vector lstm_forward(const Matrix& features, const LstmParams& params) {
  const Index d = params.recurrent_weights.cols();
  require_shape(params.input_weights.rows() == 4 * d && params.input_weights.cols() == features.rows(), [&] {
    return "lstm_forward: features have " + std::to_string(features.rows()) + " rows, weights expect " +
           std::to_string(params.input_weights.cols());
  });
  Vector h = Vector::Zero(d);
  Vector c = Vector::Zero(d);
  for (Index s = 0; s < features.cols(); ++s) {
    const Vector pre = params.input_weights * features.col(s) + params.recurrent_weights * h +
                       params.bias.transpose();
    const Vector z = grace::tanh(pre.segment(0, d));
    const Vector in = grace::sigmoid(pre.segment(d, d));
    const Vector f = grace::sigmoid(pre.segment(2 * d, d));
    const Vector o = grace::sigmoid(pre.segment(3 * d, d));
    c = f.cwiseProduct(c) + in.cwiseProduct(z);
    h = o.cwiseProduct(grace::tanh(c));
  }
  return h;
}

Vector attention_weights(const graph::Hypergraph& g, const Matrix& embeddings, Index i,
                         const TgcParams& params) {
  const Index n = g.stocks();
  const Index d = embeddings.cols();
  const Index e_count = n + (g.include_factors() ? g.factors() : 0);
  require_shape(embeddings.rows() >= e_count, [&] { return "attention_weights: missing embeddings"; });
  require_shape(params.weights.cols() == 2 * d + g.relations() + g.factors(),
                [&] { return "attention_weights: W5 width mismatch"; });
  Vector score = Vector::Zero(e_count);
  std::vector<bool> active(e_count, false);
  Vector input(params.weights.cols());
  for (Index j = 0; j < e_count; ++j) {
    if (j == i) continue;
    input << embeddings.row(i).transpose(), embeddings.row(j).transpose(), g.relation_vector(i, j);
    score(j) = params.weights.row(0).dot(input) + params.bias(0, 0);
    active[j] = true;
  }
  Vector w = Vector::Zero(e_count);
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < e_count; ++j)
    if (active[j]) peak = std::max(peak, score(j));
  double total = 0;
  for (Index j = 0; j < e_count; ++j)
    if (active[j]) total += (w(j) = std::exp(score(j) - peak));
  if (total > 0) w /= total;
  return w;
}

Vector tgc_aggregate(const graph::Hypergraph& g, const Matrix& embeddings, const Vector& weights,
                     Index i) {
  const Index n = g.stocks();
  Vector out = Vector::Zero(embeddings.cols());
  for (Index j = 0; j < n; ++j) {
    if (j == i) continue;
    const double degree = std::max(g.degrees()(j), 1);
    out += weights(j) / degree * embeddings.row(j).transpose();
  }
  if (g.include_factors())
    for (Index b = 0; b < g.factors(); ++b)
      out += weights(n + b) / static_cast<double>(n) * embeddings.row(n + b).transpose();
  return out;
}

Vector model_forward_reference(const data::FeatureTensor& x, const graph::Hypergraph& g,
                               const ModelTheta& theta) {
  theta.validate();
  const Index n = g.stocks();
  const Index e_count = theta.dims.active_entities();
  require_shape(x.entities >= e_count && x.features == theta.dims.features,
                [&] { return "model_forward: feature tensor does not match model dimensions"; });
  Matrix embeddings(e_count, theta.dims.hidden);
  for (Index e = 0; e < e_count; ++e)
    embeddings.row(e) = lstm_forward(x.entity_block(e), theta.lstm).transpose();
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const Vector w = attention_weights(g, embeddings, i, theta.tgc);
    Vector tgc(2 * theta.dims.hidden);
    tgc << embeddings.row(i).transpose(), tgc_aggregate(g, embeddings, w, i);
    out(i) = theta.head.weights.row(0).dot(tgc) + theta.head.bias(0, 0);
  }
  return out;
}

Ftgcn::Ftgcn(const graph::Hypergraph& g, const ModelDims& dims) : graph_(&g), dims_(dims) {
  require_shape(g.stocks() == dims.stocks && g.factors() == dims.factors && g.relations() == dims.relations &&
                    g.include_factors() == dims.include_factors,
                [&] { return "Ftgcn: model dimensions do not match the hypergraph"; });
  const Index n = dims.stocks;
  const Index e_count = dims.active_entities();
  mask_ = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, e_count, true);
  for (Index i = 0; i < n; ++i) mask_(i, i) = false;
  column_scale_.resize(e_count);
  for (Index j = 0; j < n; ++j) column_scale_(j) = 1.0 / std::max(g.degrees()(j), 1);
  for (Index j = n; j < e_count; ++j) column_scale_(j) = 1.0 / static_cast<double>(n);
}

Ftgcn::Bound Ftgcn::bind(ad::Tape& tape, const ModelTheta& theta, bool trainable) const {
  require_shape(theta.dims == dims_,
                [&] { return "Ftgcn::bind: parameter dimensions do not match the model"; });
  auto put = [&](const Matrix& m) { return trainable ? tape.parameter(m) : tape.constant(m); };
  Bound b;
  b.input_weights = put(theta.lstm.input_weights);
  b.recurrent_weights = put(theta.lstm.recurrent_weights);
  b.lstm_bias = put(theta.lstm.bias);
  b.attention_weights = put(theta.tgc.weights);
  b.attention_bias = put(theta.tgc.bias);
  b.head_weights = put(theta.head.weights);
  b.head_bias = put(theta.head.bias);
  return b;
}

void Ftgcn::check(const data::FeatureTensor& x) const {
  require_shape(
      x.entities >= dims_.active_entities() && x.features == dims_.features && x.lags() == dims_.lags, [&] {
        return "Ftgcn: feature tensor " + std::to_string(x.entities) + "x" + std::to_string(x.features) +
               "x" + std::to_string(x.lags()) + " does not match model (" +
               std::to_string(dims_.active_entities()) + " entities, P=" + std::to_string(dims_.features) +
               ", S=" + std::to_string(dims_.lags) + ")";
      });
}

namespace {

// One LSTM step as a single tape node. Value is [h | c]; for the first step the
// previous state is zero and `state` is unused.
ad::Var lstm_step(ad::Tape& tape, const Matrix& input, const ad::Var& wx, const ad::Var& wh,
                  const ad::Var& bias, const ad::Var* state, Index d) {
  const Index rows = input.rows();
  Matrix pre = input * wx.value().transpose();
  if (state != nullptr) pre.noalias() += state->value().leftCols(d) * wh.value().transpose();
  pre.rowwise() += bias.value().row(0);
  Matrix gates(rows, 4 * d);
  gates.leftCols(d) = grace::tanh(pre.leftCols(d));
  gates.rightCols(3 * d) = grace::sigmoid(pre.rightCols(3 * d));
  const Matrix c_prev = state != nullptr ? Matrix(state->value().rightCols(d)) : Matrix::Zero(rows, d);
  const auto z = gates.leftCols(d).array();
  const auto in = gates.middleCols(d, d).array();
  const auto f = gates.middleCols(2 * d, d).array();
  const auto o = gates.rightCols(d).array();
  Matrix c = (f * c_prev.array() + in * z).matrix();
  Matrix tc = grace::tanh(c);
  Matrix out(rows, 2 * d);
  out.leftCols(d) = (o * tc.array()).matrix();
  out.rightCols(d) = c;

  ad::Var prev = state != nullptr ? *state : wx;
  return tape.record(
      std::move(out), {wx, wh, bias, prev},
      [input, wx, wh, bias, prev, has_prev = state != nullptr, gates = std::move(gates),
       tc = std::move(tc), c_prev, d](const Matrix& g, const Matrix&, ad::Tape& tp) {
        const auto z = gates.leftCols(d).array();
        const auto in = gates.middleCols(d, d).array();
        const auto f = gates.middleCols(2 * d, d).array();
        const auto o = gates.rightCols(d).array();
        const auto gh = g.leftCols(d).array();
        const Eigen::ArrayXXd dc = g.rightCols(d).array() + gh * o * (1.0 - tc.array().square());
        Matrix dpre(g.rows(), 4 * d);
        dpre.leftCols(d) = (dc * in * (1.0 - z.square())).matrix();
        dpre.middleCols(d, d) = (dc * z * in * (1.0 - in)).matrix();
        dpre.middleCols(2 * d, d) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
        dpre.rightCols(d) = (gh * tc.array() * o * (1.0 - o)).matrix();
        if (tp.needs_grad(wx)) tp.accumulate(wx, dpre.transpose() * input);
        if (tp.needs_grad(bias)) tp.accumulate(bias, dpre.colwise().sum());
        if (!has_prev) return;
        if (tp.needs_grad(wh)) tp.accumulate(wh, dpre.transpose() * prev.value().leftCols(d));
        if (tp.needs_grad(prev)) {
          Matrix dstate(g.rows(), 2 * d);
          dstate.leftCols(d) = dpre * wh.value();
          dstate.rightCols(d) = (dc * f).matrix();
          tp.accumulate(prev, dstate);
        }
      });
}

}  // namespace

ad::Var Ftgcn::embeddings(ad::Tape& tape, const Bound& p, const data::FeatureTensor& x) const {
  check(x);
  const Index d = dims_.hidden;
  const Index e_count = dims_.active_entities();
  ad::Var state;
  for (Index s = 0; s < x.lags(); ++s)
    state = lstm_step(tape, x.steps[s].topRows(e_count), p.input_weights, p.recurrent_weights,
                      p.lstm_bias, s > 0 ? &state : nullptr, d);
  return ad::slice_cols(state, 0, d);
}

ad::Var Ftgcn::relation_scores(ad::Tape& tape, const ad::Var& w) const {
  const Index n = dims_.stocks;
  const Index m_count = dims_.relations;
  const Index e_count = dims_.active_entities();
  const graph::RelationSet& rel = graph_->relation_set();
  const Matrix& wv = w.value();
  Matrix scores = Matrix::Zero(n, e_count);
  for (Index m = 0; m < m_count; ++m)
    for (const auto& [i, j] : rel.edges[m]) {
      scores(i, j) += wv(0, m);
      scores(j, i) += wv(0, m);
    }
  for (Index b = 0; n + b < e_count; ++b) scores.col(n + b).array() += wv(0, m_count + b);

  const graph::Hypergraph* g = graph_;
  return tape.record(std::move(scores), {w},
                     [w, g, n, m_count, e_count](const Matrix& adj, const Matrix&, ad::Tape& tp) {
                       Matrix grad = Matrix::Zero(1, w.cols());
                       for (Index m = 0; m < m_count; ++m)
                         for (const auto& [i, j] : g->relation_set().edges[m])
                           grad(0, m) += adj(i, j) + adj(j, i);
                       for (Index b = 0; n + b < e_count; ++b) grad(0, m_count + b) = adj.col(n + b).sum();
                       tp.accumulate(w, grad);
                     });
}

ad::Var Ftgcn::attention(ad::Tape& tape, const Bound& p, const ad::Var& xl) const {
  const Index n = dims_.stocks;
  const Index d = dims_.hidden;
  const ad::Var stocks = ad::slice_rows(xl, 0, n);
  const ad::Var self_score = ad::matmul_nt(stocks, ad::slice_cols(p.attention_weights, 0, d));
  const ad::Var other_score =
      ad::transpose(ad::matmul_nt(xl, ad::slice_cols(p.attention_weights, d, d)));
  const ad::Var rel = relation_scores(
      tape, ad::slice_cols(p.attention_weights, 2 * d, dims_.relations + dims_.factors));
  ad::Var scores = ad::add_row_broadcast(ad::add_col_broadcast(rel, self_score), other_score);
  scores = ad::add_scalar(scores, p.attention_bias);
  return ad::softmax_rows(scores, mask_);
}

ad::Var Ftgcn::forward(ad::Tape& tape, const Bound& p, const data::FeatureTensor& x) const {
  const ad::Var xl = embeddings(tape, p, x);
  const ad::Var weights = attention(tape, p, xl);
  const ad::Var aggregated = ad::matmul(ad::scale_cols(weights, column_scale_), xl);
  const ad::Var tgc = ad::concat_cols(ad::slice_rows(xl, 0, dims_.stocks), aggregated);
  return ad::add_scalar(ad::matmul_nt(tgc, p.head_weights), p.head_bias);
}

Vector Ftgcn::predict(const ModelTheta& theta, const data::FeatureTensor& x) const {
  ad::Tape tape;
  const Bound b = bind(tape, theta, false);
  return forward(tape, b, x).value().col(0);
}

}  // namespace grace::model
