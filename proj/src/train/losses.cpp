#include "grace/train/losses.hpp"

#include <cmath>

namespace grace::train {

void require_level(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw UsageError("quantile level " + std::to_string(tau) + " outside (0, 1)");
}

namespace {

void check_lengths(Index r, Index p) {
  require_shape(r == p && r > 0, [&] { return "loss: " + std::to_string(r) + " returns vs " +
                                     std::to_string(p) + " predictions"; });
}

double order_penalty(const Vector& r, const Vector& p) {
  const Index n = r.size();
  double total = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) total += std::max(0.0, -(p(i) - p(j)) * (r(i) - r(j)));
  return total;
}

}  // namespace

double quantile_loss(const Vector& returns, const Vector& pred, double tau) {
  require_level(tau);
  check_lengths(returns.size(), pred.size());
  double total = 0;
  for (Index i = 0; i < returns.size(); ++i) total += pinball(returns(i) - pred(i), tau);
  return total / static_cast<double>(returns.size());
}

double pls_loss(const Vector& returns, const Vector& pred, double penalty) {
  if (penalty < 0) throw UsageError("pls_loss: penalty must be nonnegative");
  check_lengths(returns.size(), pred.size());
  const double n = static_cast<double>(returns.size());
  const double mse = (returns - pred).squaredNorm() / n;
  if (penalty == 0) return mse;
  return mse + penalty / (n * n) * order_penalty(returns, pred);
}

ad::Var quantile_loss(const ad::Var& pred, const Vector& returns, double tau) {
  require_shape(pred.cols() == 1, [&] { return "quantile_loss: predictions must be a column"; });
  const Vector p = pred.value().col(0);
  Matrix out(1, 1);
  out(0, 0) = quantile_loss(returns, p, tau);
  const double n = static_cast<double>(returns.size());
  Matrix grad(p.size(), 1);
  for (Index i = 0; i < p.size(); ++i) grad(i, 0) = -(tau - (returns(i) - p(i) < 0 ? 1.0 : 0.0)) / n;
  return pred.tape()->record(std::move(out), {pred},
                             [pred, grad](const Matrix& g, const Matrix&, ad::Tape& tp) {
                               tp.accumulate(pred, g(0, 0) * grad);
                             });
}

ad::Var pls_loss(const ad::Var& pred, const Vector& returns, double penalty) {
  require_shape(pred.cols() == 1, [&] { return "pls_loss: predictions must be a column"; });
  const Vector p = pred.value().col(0);
  Matrix out(1, 1);
  out(0, 0) = pls_loss(returns, p, penalty);
  const Index n = p.size();
  const double nd = static_cast<double>(n);
  Matrix grad = (-2.0 / nd) * (returns - p);
  if (penalty > 0) {
    // Each active unordered pair appears twice in the double sum.
    const double w = 2.0 * penalty / (nd * nd);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double dr = returns(i) - returns(j);
        if ((p(i) - p(j)) * dr < 0) grad(i, 0) -= w * dr;
      }
  }
  return pred.tape()->record(std::move(out), {pred},
                             [pred, grad](const Matrix& g, const Matrix&, ad::Tape& tp) {
                               tp.accumulate(pred, g(0, 0) * grad);
                             });
}

}  // namespace grace::train
