#pragma once

namespace drglm {

// log |Gamma(x)| without touching the process-global signgam, so
// concurrent subset fits do not race inside libm's lgamma.
double log_gamma(double x);

// Standard normal distribution.
double normal_cdf(double x);
double normal_pdf(double x);

// Inverse standard normal CDF (AS 241, Wichura 1988); accurate to
// roughly one part in 1e15. p = 0 or 1 map to -/+ infinity.
double normal_quantile(double p);

// Regularised incomplete beta I_x(a, b), evaluated by the continued
// fraction of the incomplete beta with the modified Lentz algorithm.
double regularized_incomplete_beta(double x, double a, double b);

// Student's t distribution with df > 0 degrees of freedom.
double students_t_pdf(double x, double df);
double students_t_cdf(double x, double df);

// Inverse t CDF: exact closed forms at df = 1, 2; otherwise a Newton
// refinement of the normal-quantile start against students_t_cdf.
// Agrees with a high-precision quadrature oracle to better than 1e-10.
double students_t_quantile(double p, double df);

// Two-sided tail probabilities P(|Z| >= z), P(|T_df| >= t).
double normal_two_sided_p(double z);
double students_t_two_sided_p(double t, double df);

} // namespace drglm
