#include <doctest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "nsdeform/errors.hpp"
#include "nsdeform/scoring.hpp"

using namespace nsdeform;

namespace {

// Integral of (F(t) - 1{t >= y})^2 for F = N(mean, sd^2).
double crps_quadrature(double mean, double sd, double y) {
  using boost::math::quadrature::gauss_kronrod;
  const auto cdf = [&](double t) { return 0.5 * std::erfc(-(t - mean) / (sd * std::numbers::sqrt2)); };
  const double inf = std::numeric_limits<double>::infinity();
  const double lo = gauss_kronrod<double, 61>::integrate([&](double t) { return cdf(t) * cdf(t); }, -inf, y, 15, 1e-13);
  const double hi =
      gauss_kronrod<double, 61>::integrate([&](double t) { return (1 - cdf(t)) * (1 - cdf(t)); }, y, inf, 15, 1e-13);
  return lo + hi;
}

}  // namespace

TEST_CASE("CRPS matches numerical integration") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), sd(0.05, 3.0), off(-4.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double m = mu(rng), s = sd(rng), y = m + s * off(rng);
    CHECK(std::abs(crps_gaussian(m, s, y) - crps_quadrature(m, s, y)) < 1e-6);
  }
}

TEST_CASE("CRPS special values") {
  const double at_mean = std::sqrt(2 / std::numbers::pi) - 1 / std::sqrt(std::numbers::pi);
  CHECK(crps_gaussian(0.0, 1.0, 0.0) == doctest::Approx(at_mean).epsilon(1e-14));
  CHECK(crps_gaussian(2.0, 3.0, 2.0) == doctest::Approx(3 * at_mean).epsilon(1e-14));
  CHECK(at_mean == doctest::Approx(0.2337).epsilon(1e-3));
  CHECK(crps_gaussian(1.0, 0.0, -0.5) == 1.5);
  CHECK(crps_gaussian(1.0, -1.0, 3.0) == 2.0);
  CHECK(std::abs(crps_gaussian(0.3, 1e-6, 1.1) - 0.8) < 1e-6);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double m = u(rng) - 1, s = u(rng), y = u(rng), c = u(rng);
    CHECK(crps_gaussian(c * m, c * s, c * y) == doctest::Approx(c * crps_gaussian(m, s, y)).epsilon(1e-12));
    CHECK(crps_gaussian(m, s, y) >= 0.0);
  }
}

TEST_CASE("log score") {
  CHECK(logs_gaussian(0.0, 1.0, 0.0) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));
  CHECK(logs_gaussian(1.0, 2.0, 3.0) == doctest::Approx(logs_gaussian(1.0, 2.0, 1.0) + 0.5).epsilon(1e-15));
  CHECK_THROWS_AS(logs_gaussian(0.0, 0.0, 1.0), ParameterError);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0), s(0.1, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double m = u(rng), sd = s(rng), y = u(rng);
    const double density = std::exp(-0.5 * (y - m) * (y - m) / (sd * sd)) / (sd * std::sqrt(2 * std::numbers::pi));
    CHECK(std::abs(logs_gaussian(m, sd, y) + std::log(density)) < 1e-12);
  }
}

TEST_CASE("point scores") {
  const std::vector<double> t{1.0, 2.0, 3.0};
  CHECK(mspe(t, t) == 0.0);
  CHECK(mae(t, t) == 0.0);
  const std::vector<double> p{0.0, 1.0}, y{1.0, 0.0};
  CHECK(mspe(p, y) == 1.0);
  CHECK(mae(p, y) == 1.0);
  const std::vector<double> empty;
  CHECK_THROWS_AS(mspe(empty, empty), ParameterError);
  CHECK_THROWS_AS(mae(empty, empty), ParameterError);
  CHECK_THROWS_AS(mae(p, t), ParameterError);
}

TEST_CASE("score reports are permutation invariant") {
  std::vector<double> m{0.1, -0.4, 1.2, 0.0, 0.7}, s{0.5, 1.0, 0.3, 0.9, 1.4}, y{0.0, -1.0, 1.0, 0.2, 2.0};
  const ScoreReport a = score_predictions("nonstationary", m, s, y);
  CHECK(a.n_test == 5);
  CHECK(a.model == "nonstationary");
  CHECK(a.mspe >= 0.0);
  CHECK(a.crps >= 0.0);
  std::vector<int> idx{3, 0, 4, 1, 2};
  std::vector<double> m2, s2, y2;
  for (int i : idx) {
    m2.push_back(m[i]);
    s2.push_back(s[i]);
    y2.push_back(y[i]);
  }
  const ScoreReport b = score_predictions("nonstationary", m2, s2, y2);
  CHECK(b.mspe == doctest::Approx(a.mspe).epsilon(1e-14));
  CHECK(b.mae == doctest::Approx(a.mae).epsilon(1e-14));
  CHECK(b.crps == doctest::Approx(a.crps).epsilon(1e-14));
  CHECK(b.logs == doctest::Approx(a.logs).epsilon(1e-14));
}
