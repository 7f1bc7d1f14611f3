#pragma once

namespace grace {

double normal_cdf(double x);
double normal_pdf(double x);
// Inverse of the standard normal CDF, p in (0, 1).
double normal_quantile(double p);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail probability of a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

// Two-sided p-value of a Student-t statistic.
double student_t_two_sided(double statistic, double dof);

}  // namespace grace
