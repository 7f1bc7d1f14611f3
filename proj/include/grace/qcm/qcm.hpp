#pragma once

#include <vector>

#include "grace/core/least_squares.hpp"
#include "grace/train/trainer.hpp"

namespace grace::qcm {

// Scale floor used in the skewness and kurtosis ratios.
inline constexpr double kBetaFloor = 1e-8;

// Cornish-Fisher design: rows (1, z, z^2 - 1, z^3 - 3z) at z = Phi^{-1}(tau_k).
struct QuantileGrid {
  std::vector<double> levels;
  Vector z;
  Matrix design;  // K x 4
  NormalEquations<double> normal;

  Index size() const { return design.rows(); }
};

QuantileGrid build_design(const std::vector<double>& levels);

struct MomentEstimate {
  double h = 0;
  double s = 0;
  double k = 3;
  bool degenerate = false;
  bool projected = false;
};

struct QcmFit {
  Vector beta;  // intercept (mean plus remainder, not separable), then three slopes
  MomentEstimate moments;
};

// Raises k to s^2 + 1 when the pair is infeasible.
MomentEstimate project_feasible(MomentEstimate est);

QcmFit fit_qcm(const Vector& quantiles, const QuantileGrid& grid);

struct MomentPanel {
  std::vector<Index> days;
  Matrix mu, h, s, k;  // stocks x |days|
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate, projected, invalid;
  std::vector<bool> usable;  // stock had at least four valid levels
  std::vector<int> degenerate_count, projected_count;

  Index stocks() const { return h.rows(); }
  Index size() const { return h.cols(); }
};

// `omega[i]` holds the level indices kept for stock i; each stock gets its own
// design. `mu` (stocks x |days|) comes from the mean model.
MomentPanel qcm_panel(const train::QuantilePanel& quantiles,
                      const std::vector<std::vector<int>>& omega, const Matrix& mu);

}  // namespace grace::qcm
