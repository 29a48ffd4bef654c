#pragma once

namespace wordacq {

// Regularized incomplete gamma P(a, x) (series for x < a+1, continued
// fraction otherwise) and its complement Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, double df);

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double regularized_beta(double a, double b, double x);

// Upper tail of the F distribution.
double f_distribution_sf(double f, double df1, double df2);

double normal_cdf(double z);

// CDF of the studentized range with k groups and df error degrees of
// freedom, by adaptive Gauss-Legendre integration of the double-integral
// definition. p-values for Tukey HSD are 1 - this.
double studentized_range_cdf(double q, int k, double df);

// Inverse of the above in q for a target probability (bisection).
double studentized_range_quantile(double p, int k, double df);

}  // namespace wordacq
