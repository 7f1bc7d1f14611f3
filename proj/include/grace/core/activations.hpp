#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "grace/core/types.hpp"

namespace grace {

// The exponential is taken once, as a packet expression, and the argument is
// never positive so nothing overflows. The sign fix-up is a plain loop.
template <typename Derived>
Mat<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> in = x;
  Mat<Scalar> out = (-in.array().abs()).exp().matrix();
  Scalar* v = out.data();
  for (Index k = 0; k < out.size(); ++k) {
    const Scalar r = Scalar(1) / (Scalar(1) + v[k]);
    v[k] = in.data()[k] >= Scalar(0) ? r : v[k] * r;
  }
  return out;
}

template <typename Derived>
Mat<typename Derived::Scalar> tanh(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> in = x;
  Mat<Scalar> out = (Scalar(-2) * in.array().abs()).exp().matrix();
  Scalar* v = out.data();
  for (Index k = 0; k < out.size(); ++k) {
    const Scalar mag = (Scalar(1) - v[k]) / (Scalar(1) + v[k]);
    v[k] = in.data()[k] >= Scalar(0) ? mag : -mag;
  }
  return out;
}

// Row-wise softmax. Entries with mask(i, j) == false get weight 0 and do not
// take part in the normalization; a fully masked row is all zeros.
template <typename Derived, typename MaskDerived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x,
                                           const Eigen::DenseBase<MaskDerived>& mask) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = Mat<Scalar>::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j)
      if (mask(i, j)) peak = std::max(peak, x(i, j));
    if (peak == -std::numeric_limits<Scalar>::infinity()) continue;
    Scalar total = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (!mask(i, j)) continue;
      out(i, j) = std::exp(x(i, j) - peak);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

template <typename Derived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  return softmax_rows(x, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
                             x.rows(), x.cols(), true));
}

}  // namespace grace
