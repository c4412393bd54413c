#pragma once

namespace unb {

double normal_cdf(double z);
/// Two-sided tail 2 * P(Z > |z|).
double normal_two_sided_p(double z);
/// Inverse of the standard normal CDF, for 0 < prob < 1.
double normal_quantile(double prob);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
/// P(chi^2_df > x).
double chi_squared_sf(double x, double df);

}  // namespace unb
