#include "nsdeform/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nsdeform/errors.hpp"

namespace nsdeform {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Taylor coefficients of 1/Gamma(z) (Abramowitz & Stegun 6.1.34), starting at z^2.
constexpr double kRecipGamma[] = {
    0.5772156649015329,  -0.6558780715202538, -0.0420026350340952, 0.1665386113822915,
    -0.0421977345555443, -0.0096219715278770, 0.0072189432466630,  -0.0011651675918591,
    -0.0002152416741149, 0.0001280502823882,  -0.0000201348547807, -0.0000012504934821,
    0.0000011330272320,  -0.0000002056338417, 0.0000000061160950,  0.0000000050020075,
};

// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu); odd part of 1/Gamma(1+z).
double temme_gam1(double mu) {
  if (std::abs(mu) > 0.1) {
    return (1.0 / std::tgamma(1.0 - mu) - 1.0 / std::tgamma(1.0 + mu)) / (2.0 * mu);
  }
  // 1/Gamma(1+z) = sum_k c_k z^k with c_k = kRecipGamma[k-1]; keep odd k.
  const double mu2 = mu * mu;
  double sum = 0.0;
  double pw = 1.0;
  for (int k = 1; k <= 15; k += 2) {
    sum += kRecipGamma[k - 1] * pw;
    pw *= mu2;
  }
  return -sum;
}

}  // namespace

double bessel_k(double nu, double x) {
  if (!(x > 0.0) || !(nu >= 0.0) || !std::isfinite(nu)) {
    throw ParameterError("bessel_k requires nu >= 0 and x > 0");
  }
  if (x > 745.0) return 0.0;
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;  // |mu| <= 1/2
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;
  double kmu, k1;

  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const double gampl = 1.0 / std::tgamma(1.0 + mu);
    const double gammi = 1.0 / std::tgamma(1.0 - mu);
    const double gam1 = temme_gam1(mu);
    const double gam2 = 0.5 * (gammi + gampl);
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
      c *= d / i;
      p /= (i - mu);
      q /= (i + mu);
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel_k: series failed to converge");
    kmu = sum;
    k1 = sum1 * xi2;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    k1 = kmu * (mu + x + 0.5 - h) * xi;
  }

  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  return kmu;
}

double matern_correlation_bessel(double u, double nu) {
  if (!(nu > 0.0)) throw ParameterError("Matern smoothness must be positive");
  if (u <= 0.0) return 1.0;
  const double k = bessel_k(nu, u);
  if (k == 0.0) return 0.0;
  const double log_rho =
      (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(u) + std::log(k);
  return std::min(1.0, std::exp(log_rho));
}

double matern_correlation(double u, double nu) {
  if (!(nu > 0.0)) throw ParameterError("Matern smoothness must be positive");
  if (u <= 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-u);
  if (nu == 1.5) return (1.0 + u) * std::exp(-u);
  if (nu == 2.5) return (1.0 + u + u * u / 3.0) * std::exp(-u);
  return matern_correlation_bessel(u, nu);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace nsdeform
