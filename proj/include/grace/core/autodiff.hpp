#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "grace/core/types.hpp"

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation as a node holding its forward value. Nodes
// are appended in evaluation order, so the node index is a topological order
// and backward() is a single reverse sweep.
namespace grace::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
public:
  // Receives the adjoint and forward value of the node's output and pushes
  // contributions into its inputs with Tape::accumulate.
  using Backward =
      std::function<void(const Matrix& adjoint, const Matrix& value, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient. Parameters are numbered in registration
  // order; backward() returns gradients in that order.
  Var parameter(Matrix value);
  Var constant(Matrix value);

  // Records an operation node. The value must be finite.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  // Adds `grad` into the adjoint of `v`. Only meaningful inside a Backward.
  void accumulate(const Var& v, const Matrix& grad);
  bool needs_grad(const Var& v) const { return nodes_[v.id_].needs_grad; }

  // Reverse sweep from a 1x1 root. Returns one gradient per parameter (zero
  // matrices for parameters not on any path to the root).
  std::vector<Matrix> backward(const Var& root);

  const Matrix& value(const Var& v) const { return nodes_[v.id_].value; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return params_.size(); }

private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    Backward backward;
    bool needs_grad = false;
  };

  void check_owner(const Var& v) const;

  std::vector<Node> nodes_;
  std::vector<int> params_;
  bool in_backward_ = false;
};

// Differentiable operations. All operands must live on the same tape.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, const Var& s);        // s is 1x1
Var add_row_broadcast(const Var& a, const Var& r);  // r is 1 x a.cols()
Var add_col_broadcast(const Var& a, const Var& c);  // c is a.rows() x 1
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);
Var scale_cols(const Var& a, const RowVector& factors);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
Var transpose(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

}  // namespace grace::ad
