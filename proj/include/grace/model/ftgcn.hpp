#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grace/core/autodiff.hpp"
#include "grace/data/features.hpp"
#include "grace/graph/hypergraph.hpp"

namespace grace::model {

struct ModelDims {
  Index stocks = 0;
  Index factors = 0;
  Index relations = 0;
  Index features = 0;
  Index lags = 0;
  Index hidden = 0;
  bool include_factors = true;

  // Entities whose embeddings take part in the forward pass.
  Index active_entities() const { return stocks + (include_factors ? factors : 0); }
  Index attention_width() const { return relations + factors + 2 * hidden; }
  bool operator==(const ModelDims&) const = default;
};

// One-layer LSTM. Gate blocks are stacked in the order z (candidate), i
// (input), f (forget), o (output): rows [k*d, (k+1)*d) belong to gate k.
struct LstmParams {
  Matrix input_weights;      // 4d x P
  Matrix recurrent_weights;  // 4d x d
  Matrix bias;               // 1 x 4d
};

// Attention row W5 = [self embedding | other embedding | relation vector].
struct TgcParams {
  Matrix weights;  // 1 x (2d + M + B)
  Matrix bias;     // 1 x 1
};

struct HeadParams {
  Matrix weights;  // 1 x 2d
  Matrix bias;     // 1 x 1
};

struct ModelTheta {
  ModelDims dims;
  LstmParams lstm;
  TgcParams tgc;
  HeadParams head;

  // Glorot-uniform weights, zero biases.
  static ModelTheta initialize(const ModelDims& dims, std::uint64_t seed);

  static constexpr int kArrayCount = 7;
  // Fixed order: LSTM input, recurrent, bias; attention weights, bias; head
  // weights, bias.
  std::vector<Matrix*> arrays();
  std::vector<const Matrix*> arrays() const;
  static const std::vector<std::string>& array_names();
  // Index ranges of the LSTM, attention and head groups within arrays().
  static std::vector<std::pair<int, int>> groups();

  void validate() const;
};

ModelDims dims_for(const graph::Hypergraph& g, Index features, Index lags, Index hidden);

// Per-entity reference implementation, written directly from the recursions.

// Final hidden state of the LSTM run over the P x S block, starting from zero.
Vector lstm_forward(const Matrix& features, const LstmParams& params);

// Attention weights of stock i over all active entities (0 for i itself).
Vector attention_weights(const graph::Hypergraph& g, const Matrix& embeddings, Index i,
                         const TgcParams& params);

// Degree-scaled aggregation of neighbour and factor embeddings for stock i.
Vector tgc_aggregate(const graph::Hypergraph& g, const Matrix& embeddings, const Vector& weights,
                     Index i);

// Reference forward pass; used to cross-check the batched one.
Vector model_forward_reference(const data::FeatureTensor& x, const graph::Hypergraph& g,
                               const ModelTheta& theta);

// Batched forward pass over all stocks of one day, recorded on a tape.
class Ftgcn {
public:
  struct Bound {
    ad::Var input_weights, recurrent_weights, lstm_bias;
    ad::Var attention_weights, attention_bias;
    ad::Var head_weights, head_bias;
  };

  Ftgcn(const graph::Hypergraph& g, const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }

  // Registers theta's arrays on the tape, as parameters or as constants.
  Bound bind(ad::Tape& tape, const ModelTheta& theta, bool trainable) const;

  // N x 1 outputs.
  ad::Var forward(ad::Tape& tape, const Bound& params, const data::FeatureTensor& x) const;

  // Embeddings of the active entities (E x d) and attention matrix (N x E).
  ad::Var embeddings(ad::Tape& tape, const Bound& params, const data::FeatureTensor& x) const;
  ad::Var attention(ad::Tape& tape, const Bound& params, const ad::Var& embeddings) const;

  Vector predict(const ModelTheta& theta, const data::FeatureTensor& x) const;

private:
  ad::Var relation_scores(ad::Tape& tape, const ad::Var& relation_weights) const;
  void check(const data::FeatureTensor& x) const;

  const graph::Hypergraph* graph_;
  ModelDims dims_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask_;  // N x E
  RowVector column_scale_;                                   // 1 / max(d_j, 1) or 1 / N
};

}  // namespace grace::model
