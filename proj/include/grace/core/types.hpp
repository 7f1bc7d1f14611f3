#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <limits>
#include <string>
#include <string_view>

#include "grace/core/errors.hpp"

namespace grace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Branch-free scan: |v| <= max fails for NaN and both infinities.
template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (x.derived().array().abs() <= std::numeric_limits<Scalar>::max()).all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, std::string_view what) {
  if (!all_finite(x)) throw NumericError(std::string(what) + ": non-finite value");
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Builds the message only on failure; for hot paths.
template <std::invocable F>
void require_shape(bool ok, F&& message) {
  if (!ok) throw ShapeError(std::string(message()));
}

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace grace
