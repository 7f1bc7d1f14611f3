#include "grace/diag/moment_tests.hpp"

#include <cmath>
#include <limits>

#include "grace/core/special_functions.hpp"

namespace grace::diag {

std::string moment_name(Moment m) {
  switch (m) {
    case Moment::Mean: return "mu";
    case Moment::Variance: return "h";
    case Moment::Skewness: return "s";
    case Moment::Kurtosis: return "k";
  }
  return "?";
}

TTestResult t_test(const Vector& e) {
  if (e.size() < 30)
    throw SampleSizeError("t test needs at least 30 observations, got " + std::to_string(e.size()));
  require_finite(e, "t test residuals");
  const double n = static_cast<double>(e.size());
  TTestResult out;
  out.mean = e.mean();
  const double var = (e.array() - out.mean).square().sum() / (n - 1);
  if (var == 0) {
    if (out.mean == 0) return out;
    out.defined = false;
    out.tstat = std::copysign(std::numeric_limits<double>::infinity(), out.mean);
    out.p_value = 0;
    return out;
  }
  out.tstat = out.mean / std::sqrt(var / n);
  out.p_value = student_t_two_sided(out.tstat, n - 1);
  return out;
}

Vector moment_residuals(Moment m, const Vector& r, const Vector& mu, const Vector& h,
                        const Vector& s, const Vector& k) {
  const Vector dev = r - mu;
  if (m == Moment::Mean) return dev;
  if (m == Moment::Variance) return dev.array().square().matrix() - h;
  if ((h.array() <= 0).any())
    throw NumericError("standardized residuals need h > 0 on the whole span");
  const Eigen::ArrayXd z = dev.array() / h.array().sqrt();
  if (m == Moment::Skewness) return (z.cube() - s.array()).matrix();
  return (z.square().square() - k.array()).matrix();
}

std::vector<StockTests> moment_ttests(const Matrix& returns, const qcm::MomentPanel& moments,
                                      const std::vector<Index>& stocks) {
  const Index days = moments.size();
  std::vector<StockTests> out;
  Vector r(days);
  for (Index i : stocks) {
    for (Index t = 0; t < days; ++t) r(t) = returns(i, moments.days[t]);
    StockTests st;
    st.stock = i;
    const Vector mu = moments.mu.row(i).transpose();
    const Vector h = moments.h.row(i).transpose();
    const Vector s = moments.s.row(i).transpose();
    const Vector k = moments.k.row(i).transpose();
    for (std::size_t m = 0; m < kMoments.size(); ++m) {
      try {
        st.tests[m] = t_test(moment_residuals(kMoments[m], r, mu, h, s, k));
      } catch (const NumericError&) {
        st.tests[m] = TTestResult{0, 0, 0, false};
      }
    }
    out.push_back(st);
  }
  return out;
}

double acceptance_rate(const std::vector<StockTests>& results, Moment m, double alpha) {
  if (results.empty()) return 0;
  int accepted = 0;
  for (const auto& st : results) accepted += st.tests[static_cast<int>(m)].accept(alpha);
  return 100.0 * accepted / static_cast<double>(results.size());
}

}  // namespace grace::diag
