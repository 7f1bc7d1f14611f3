#include "grace/core/autodiff.hpp"

#include "grace/core/activations.hpp"

namespace grace::ad {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw UsageError("autodiff: use of an unbound variable");
  return tape_->value(*this);
}

void Tape::check_owner(const Var& v) const {
  if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size()))
    throw UsageError("autodiff: variable does not belong to this tape");
}

Var Tape::parameter(Matrix value) {
  require_finite(value, "autodiff parameter");
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  const int id = static_cast<int>(nodes_.size()) - 1;
  params_.push_back(id);
  return Var(this, id);
}

Var Tape::constant(Matrix value) {
  require_finite(value, "autodiff constant");
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  require_finite(value, "autodiff operation");
  bool grad = false;
  for (const Var& in : inputs) {
    check_owner(in);
    grad = grad || nodes_[in.id_].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), grad ? std::move(backward) : nullptr, grad});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& grad) {
  Node& node = nodes_[v.id_];
  if (!node.needs_grad) return;
  if (node.adjoint.size() == 0)
    node.adjoint = grad;
  else
    node.adjoint += grad;
}

std::vector<Matrix> Tape::backward(const Var& root) {
  check_owner(root);
  if (root.rows() != 1 || root.cols() != 1)
    throw UsageError("autodiff: backward() needs a scalar root, got " +
                     shape_str(root.rows(), root.cols()));
  if (in_backward_) throw UsageError("autodiff: re-entrant backward()");
  in_backward_ = true;
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  nodes_[root.id_].adjoint = Matrix::Ones(1, 1);
  for (int id = root.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backward && n.adjoint.size() != 0) n.backward(n.adjoint, n.value, *this);
  }
  in_backward_ = false;

  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (int id : params_) {
    const Node& n = nodes_[id];
    grads.push_back(n.adjoint.size() != 0 ? n.adjoint
                                          : Matrix::Zero(n.value.rows(), n.value.cols()));
  }
  return grads;
}

namespace {

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw UsageError("autodiff: operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw UsageError("autodiff: unbound variable");
  return *a.tape();
}

void same_shape(const Var& a, const Var& b, const char* op) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), [&] {
    return std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
           shape_str(b.rows(), b.cols());
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.cols() == b.rows(), [&] { return "matmul: inner dimensions " +
                                          shape_str(a.rows(), a.cols()) + " x " +
                                          shape_str(b.rows(), b.cols()); });
  return t.record(a.value() * b.value(), {a, b}, [a, b](const Matrix& g, const Matrix&, Tape& tp) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.cols() == b.cols(), [&] { return "matmul_nt: inner dimensions " +
                                          shape_str(a.rows(), a.cols()) + " x " +
                                          shape_str(b.cols(), b.rows()); });
  return t.record(a.value() * b.value().transpose(), {a, b},
                  [a, b](const Matrix& g, const Matrix&, Tape& tp) {
                    if (tp.needs_grad(a)) tp.accumulate(a, g * b.value());
                    if (tp.needs_grad(b)) tp.accumulate(b, g.transpose() * a.value());
                  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "add");
  return t.record(a.value() + b.value(), {a, b}, [a, b](const Matrix& g, const Matrix&, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "sub");
  return t.record(a.value() - b.value(), {a, b}, [a, b](const Matrix& g, const Matrix&, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "hadamard");
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](const Matrix& g, const Matrix&, Tape& tp) {
                    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
                    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
                  });
}

Var scale(const Var& a, double c) {
  return tape_of(a).record(c * a.value(), {a},
                           [a, c](const Matrix& g, const Matrix&, Tape& tp) { tp.accumulate(a, c * g); });
}

Var add_scalar(const Var& a, const Var& s) {
  Tape& t = tape_of(a, s);
  require_shape(s.rows() == 1 && s.cols() == 1, [&] { return "add_scalar: scalar operand must be 1x1"; });
  Matrix out = a.value().array() + s.value()(0, 0);
  return t.record(std::move(out), {a, s}, [a, s](const Matrix& g, const Matrix&, Tape& tp) {
    tp.accumulate(a, g);
    if (tp.needs_grad(s)) tp.accumulate(s, Matrix::Constant(1, 1, g.sum()));
  });
}

Var add_row_broadcast(const Var& a, const Var& r) {
  Tape& t = tape_of(a, r);
  require_shape(r.rows() == 1 && r.cols() == a.cols(),
                [&] { return "add_row_broadcast: row must be 1x" + std::to_string(a.cols()); });
  Matrix out = a.value().rowwise() + r.value().row(0);
  return t.record(std::move(out), {a, r}, [a, r](const Matrix& g, const Matrix&, Tape& tp) {
    tp.accumulate(a, g);
    if (tp.needs_grad(r)) tp.accumulate(r, g.colwise().sum());
  });
}

Var add_col_broadcast(const Var& a, const Var& c) {
  Tape& t = tape_of(a, c);
  require_shape(c.cols() == 1 && c.rows() == a.rows(),
                [&] { return "add_col_broadcast: column must be " + std::to_string(a.rows()) + "x1"; });
  Matrix out = a.value().colwise() + c.value().col(0);
  return t.record(std::move(out), {a, c}, [a, c](const Matrix& g, const Matrix&, Tape& tp) {
    tp.accumulate(a, g);
    if (tp.needs_grad(c)) tp.accumulate(c, g.rowwise().sum());
  });
}

Var tanh(const Var& a) {
  return tape_of(a).record(grace::tanh(a.value()), {a},
                           [a](const Matrix& g, const Matrix& y, Tape& tp) {
                             tp.accumulate(a, g.array() * (1.0 - y.array().square()));
                           });
}

Var sigmoid(const Var& a) {
  return tape_of(a).record(grace::sigmoid(a.value()), {a},
                           [a](const Matrix& g, const Matrix& y, Tape& tp) {
                             tp.accumulate(a, g.array() * y.array() * (1.0 - y.array()));
                           });
}

Var softmax_rows(const Var& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
  require_shape(mask.rows() == a.rows() && mask.cols() == a.cols(),
                [&] { return "softmax_rows: mask shape mismatch"; });
  return tape_of(a).record(grace::softmax_rows(a.value(), mask), {a},
                           [a](const Matrix& g, const Matrix& p, Tape& tp) {
                             // dS = P .* (dP - rowsum(dP .* P)); masked entries have P = 0.
                             const Vector inner = g.cwiseProduct(p).rowwise().sum();
                             Matrix ds = p.cwiseProduct(g.colwise() - inner);
                             tp.accumulate(a, ds);
                           });
}

Var scale_cols(const Var& a, const RowVector& factors) {
  require_shape(factors.size() == a.cols(), [&] { return "scale_cols: factor count mismatch"; });
  Matrix out = a.value() * factors.asDiagonal();
  return tape_of(a).record(std::move(out), {a},
                           [a, factors](const Matrix& g, const Matrix&, Tape& tp) {
                             tp.accumulate(a, g * factors.asDiagonal());
                           });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.rows() == b.rows(), [&] { return "concat_cols: row count mismatch"; });
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index left = a.cols();
  return t.record(std::move(out), {a, b},
                  [a, b, left](const Matrix& g, const Matrix&, Tape& tp) {
                    if (tp.needs_grad(a)) tp.accumulate(a, g.leftCols(left));
                    if (tp.needs_grad(b)) tp.accumulate(b, g.rightCols(g.cols() - left));
                  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  require_shape(start >= 0 && count >= 0 && start + count <= a.cols(),
                [&] { return "slice_cols: range out of bounds"; });
  return tape_of(a).record(a.value().middleCols(start, count), {a},
                           [a, start, count](const Matrix& g, const Matrix&, Tape& tp) {
                             Matrix full = Matrix::Zero(a.rows(), a.cols());
                             full.middleCols(start, count) = g;
                             tp.accumulate(a, full);
                           });
}

Var slice_rows(const Var& a, Index start, Index count) {
  require_shape(start >= 0 && count >= 0 && start + count <= a.rows(),
                [&] { return "slice_rows: range out of bounds"; });
  return tape_of(a).record(a.value().middleRows(start, count), {a},
                           [a, start, count](const Matrix& g, const Matrix&, Tape& tp) {
                             Matrix full = Matrix::Zero(a.rows(), a.cols());
                             full.middleRows(start, count) = g;
                             tp.accumulate(a, full);
                           });
}

Var transpose(const Var& a) {
  return tape_of(a).record(a.value().transpose(), {a},
                           [a](const Matrix& g, const Matrix&, Tape& tp) {
                             tp.accumulate(a, g.transpose());
                           });
}

Var sum(const Var& a) {
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a},
                           [a](const Matrix& g, const Matrix&, Tape& tp) {
                             tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                           });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  require_shape(n > 0, [&] { return "mean: empty operand"; });
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum() / n), {a},
                           [a, n](const Matrix& g, const Matrix&, Tape& tp) {
                             tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
                           });
}

}  // namespace grace::ad
