#pragma once

#include "grace/core/types.hpp"

namespace grace {

// Relative eigenvalue floor below which a normal matrix is treated as singular.
inline constexpr double kSingularRatio = 1e-12;

// Cholesky factor of a design's normal matrix, checked for rank deficiency.
// Reusable across responses that share the same design.
template <typename Scalar>
class NormalEquations {
public:
  NormalEquations() = default;

  template <typename Derived>
  explicit NormalEquations(const Eigen::MatrixBase<Derived>& design) : design_t_(design.transpose()) {
    if (design.rows() < design.cols())
      throw SingularityError("least squares: " + std::to_string(design.rows()) +
                             " observations for " + std::to_string(design.cols()) +
                             " coefficients");
    const Mat<Scalar> normal = design_t_ * design;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(normal, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    min_eigen_ = ev.minCoeff();
    max_eigen_ = ev.maxCoeff();
    if (!(max_eigen_ > 0) || min_eigen_ < kSingularRatio * max_eigen_)
      throw SingularityError("least squares: rank-deficient design (eigenvalue ratio " +
                             std::to_string(max_eigen_ > 0 ? min_eigen_ / max_eigen_ : 0.0) + ")");
    llt_.compute(normal);
  }

  template <typename Derived>
  Vec<Scalar> solve(const Eigen::MatrixBase<Derived>& response) const {
    require_shape(response.size() == design_t_.cols(),
                  "least squares: response length " + std::to_string(response.size()) +
                      " vs " + std::to_string(design_t_.cols()) + " design rows");
    return llt_.solve(design_t_ * response);
  }

  Scalar min_eigenvalue() const { return min_eigen_; }
  Scalar max_eigenvalue() const { return max_eigen_; }
  Index observations() const { return design_t_.cols(); }

private:
  Mat<Scalar> design_t_;
  Eigen::LLT<Mat<Scalar>> llt_;
  Scalar min_eigen_ = 0;
  Scalar max_eigen_ = 0;
};

// Ordinary least squares via the normal equations.
template <typename DerivedA, typename DerivedB>
Vec<typename DerivedA::Scalar> solve_least_squares(const Eigen::MatrixBase<DerivedA>& design,
                                                   const Eigen::MatrixBase<DerivedB>& response) {
  return NormalEquations<typename DerivedA::Scalar>(design).solve(response);
}

}  // namespace grace
