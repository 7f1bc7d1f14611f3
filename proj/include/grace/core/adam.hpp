#pragma once

#include <cmath>

#include "grace/core/types.hpp"

namespace grace {

// Adam moment accumulators for one parameter array.
template <typename Scalar>
struct AdamState {
  static constexpr Scalar kBeta1 = Scalar(0.9);
  static constexpr Scalar kBeta2 = Scalar(0.999);
  static constexpr Scalar kEpsilon = Scalar(1e-8);

  AdamState() = default;
  AdamState(Index rows, Index cols)
      : m(Mat<Scalar>::Zero(rows, cols)), v(Mat<Scalar>::Zero(rows, cols)) {}

  Mat<Scalar> m;
  Mat<Scalar> v;
  long step = 0;
  Scalar beta1 = kBeta1;
  Scalar beta2 = kBeta2;
  Scalar epsilon = kEpsilon;
};

// One bias-corrected Adam update. Advances `state` and returns the parameter
// delta (to be added to the parameter).
template <typename Scalar, typename Derived>
Mat<Scalar> adam_step(AdamState<Scalar>& state, const Eigen::MatrixBase<Derived>& grad,
                      Scalar learning_rate) {
  if (!(learning_rate > 0)) throw UsageError("adam_step: learning rate must be positive");
  if (state.m.size() == 0) state = AdamState<Scalar>(grad.rows(), grad.cols());
  require_shape(state.m.rows() == grad.rows() && state.m.cols() == grad.cols(), [&] {
    return "adam_step: gradient " + shape_str(grad.rows(), grad.cols()) + " vs state " +
           shape_str(state.m.rows(), state.m.cols());
  });
  require_finite(grad, "adam_step gradient");

  ++state.step;
  state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grad;
  state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  return (-learning_rate * (state.m.array() / c1) /
          ((state.v.array() / c2).sqrt() + state.epsilon))
      .matrix();
}

}  // namespace grace
