#pragma once

#include "grace/core/autodiff.hpp"

namespace grace::train {

// rho_tau(x) = x (tau - 1{x < 0}).
inline double pinball(double x, double tau) { return x * (tau - (x < 0 ? 1.0 : 0.0)); }

void require_level(double tau);

// (1/N) sum rho_tau(r_i - pred_i).
double quantile_loss(const Vector& returns, const Vector& pred, double tau);

// Mean squared error plus (lambda/N^2) sum_{i,j} max{0, -(p_i - p_j)(r_i - r_j)}.
double pls_loss(const Vector& returns, const Vector& pred, double penalty);

// Tape versions; `pred` is N x 1. The pinball subgradient at a zero residual is
// the one of the x >= 0 branch.
ad::Var quantile_loss(const ad::Var& pred, const Vector& returns, double tau);
ad::Var pls_loss(const ad::Var& pred, const Vector& returns, double penalty);

}  // namespace grace::train
