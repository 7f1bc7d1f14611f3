#include "grace/qcm/qcm.hpp"

#include <cmath>
#include <map>

#include "grace/core/special_functions.hpp"

namespace grace::qcm {

QuantileGrid build_design(const std::vector<double>& levels) {
  if (levels.size() < 4)
    throw ConditionError("QCM design needs at least 4 quantile levels, got " +
                         std::to_string(levels.size()));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k] > 0 && levels[k] < 1))
      throw ConditionError("quantile level " + std::to_string(levels[k]) + " outside (0, 1)");
    if (k > 0 && !(levels[k] > levels[k - 1]))
      throw ConditionError("quantile levels must be strictly increasing");
  }
  QuantileGrid grid;
  grid.levels = levels;
  const Index n = static_cast<Index>(levels.size());
  grid.z.resize(n);
  grid.design.resize(n, 4);
  for (Index k = 0; k < n; ++k) {
    const double z = normal_quantile(levels[k]);
    grid.z(k) = z;
    grid.design.row(k) << 1.0, z, z * z - 1.0, z * z * z - 3.0 * z;
  }
  try {
    grid.normal = NormalEquations<double>(grid.design);
  } catch (const SingularityError& e) {
    throw ConditionError(std::string("QCM design is not positive definite: ") + e.what());
  }
  return grid;
}

MomentEstimate project_feasible(MomentEstimate est) {
  const double bound = est.s * est.s + 1.0;
  if (est.k < bound) {
    est.k = bound;
    est.projected = true;
  }
  return est;
}

QcmFit fit_qcm(const Vector& quantiles, const QuantileGrid& grid) {
  require_shape(quantiles.size() == grid.size(),
                "fit_qcm: " + std::to_string(quantiles.size()) + " quantiles for " +
                    std::to_string(grid.size()) + " levels");
  require_finite(quantiles, "fit_qcm quantiles");
  QcmFit fit;
  fit.beta = grid.normal.solve(quantiles);
  const double b1 = fit.beta(1);
  const double scale = std::max(b1, kBetaFloor);
  MomentEstimate& m = fit.moments;
  m.h = b1 * b1;
  m.s = 6.0 * fit.beta(2) / scale;
  m.k = 24.0 * fit.beta(3) / scale + 3.0;
  m.degenerate = b1 < kBetaFloor;
  m = project_feasible(m);
  return fit;
}

MomentPanel qcm_panel(const train::QuantilePanel& quantiles,
                      const std::vector<std::vector<int>>& omega, const Matrix& mu) {
  const Index n = quantiles.stocks();
  const Index days = static_cast<Index>(quantiles.days.size());
  require_shape(static_cast<Index>(omega.size()) == n, "qcm_panel: one level set per stock");
  require_shape(mu.rows() == n && mu.cols() == days,
                "qcm_panel: mean panel is " + shape_str(mu.rows(), mu.cols()) + ", expected " +
                    shape_str(n, days));
  MomentPanel out;
  out.days = quantiles.days;
  out.mu = mu;
  out.h = Matrix::Zero(n, days);
  out.s = Matrix::Zero(n, days);
  out.k = Matrix::Constant(n, days, 3.0);
  out.degenerate.setConstant(n, days, false);
  out.projected.setConstant(n, days, false);
  out.invalid.setConstant(n, days, false);
  out.usable.assign(n, false);
  out.degenerate_count.assign(n, 0);
  out.projected_count.assign(n, 0);

  std::map<std::vector<int>, QuantileGrid> designs;
  for (Index i = 0; i < n; ++i) {
    const std::vector<int>& keep = omega[i];
    if (keep.size() < 4) {
      out.invalid.row(i).setConstant(true);
      continue;
    }
    auto it = designs.find(keep);
    if (it == designs.end()) {
      std::vector<double> levels;
      for (int k : keep) levels.push_back(quantiles.levels.at(k));
      it = designs.emplace(keep, build_design(levels)).first;
    }
    const QuantileGrid& grid = it->second;
    out.usable[i] = true;
    Vector y(grid.size());
    for (Index t = 0; t < days; ++t) {
      for (std::size_t k = 0; k < keep.size(); ++k) y(static_cast<Index>(k)) = quantiles(i, t, keep[k]);
      if (!y.allFinite()) {
        out.invalid(i, t) = out.degenerate(i, t) = true;
        ++out.degenerate_count[i];
        continue;
      }
      const MomentEstimate m = fit_qcm(y, grid).moments;
      out.h(i, t) = m.h;
      out.s(i, t) = m.s;
      out.k(i, t) = m.k;
      out.degenerate(i, t) = m.degenerate;
      out.projected(i, t) = m.projected;
      out.degenerate_count[i] += m.degenerate;
      out.projected_count[i] += m.projected;
    }
  }
  return out;
}

}  // namespace grace::qcm
