#pragma once

namespace nsdeform {

/// Modified Bessel function of the second kind K_nu(x) for nu >= 0, x > 0.
/// Temme series for x < 2, Steed's continued fraction otherwise, then
/// upward recurrence in the order.
double bessel_k(double nu, double x);

/// Matern correlation (2^{1-nu} / Gamma(nu)) u^nu K_nu(u) at scaled lag u >= 0.
/// Half-integer orders 1/2, 3/2, 5/2 use their closed forms.
double matern_correlation(double u, double nu);

/// Same as matern_correlation but always goes through bessel_k.
double matern_correlation_bessel(double u, double nu);

double normal_pdf(double z);
double normal_cdf(double z);

}  // namespace nsdeform
