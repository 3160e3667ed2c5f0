#include <doctest.h>

#include <cmath>
#include <vector>

#include "nsdeform/errors.hpp"
#include "nsdeform/gp.hpp"
#include "nsdeform/random.hpp"
#include "nsdeform/variogram.hpp"

using namespace nsdeform;

namespace {

Eigen::MatrixXd random_sites(int n, double side, std::uint64_t seed) {
  Philox4x32 rng(seed, 99);
  Eigen::MatrixXd s(n, 2);
  for (int i = 0; i < n; ++i) s.row(i) << side * rng.uniform(), side * rng.uniform();
  return s;
}

Eigen::VectorXd simulate_exponential(const Eigen::MatrixXd& sites, double sigma2, double alpha, std::uint64_t seed) {
  const VariogramModel m{sigma2, alpha, 0.5, 0.0};
  const Eigen::Index n = sites.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = matern_covariance((sites.row(i) - sites.row(j)).norm(), m);
  const auto chol = cholesky_with_jitter(c);
  const auto z = standard_normals(seed, static_cast<std::size_t>(n));
  return chol.llt.matrixL() * Eigen::Map<const Eigen::VectorXd>(z.data(), n);
}

}  // namespace

TEST_CASE("matern covariance special cases") {
  const VariogramModel expo{2.0, 0.7, 0.5, 0.0};
  for (double h = 0.0; h <= 7.0; h += 0.05) {
    const double ref = h == 0.0 ? 2.0 : 2.0 * std::exp(-h / 0.7);
    CHECK(std::abs(matern_covariance(h, expo) - ref) < 1e-12);
  }
  const VariogramModel with_nugget{1.3, 0.4, 0.6, 0.2};
  CHECK(matern_covariance(0.0, with_nugget) == doctest::Approx(1.5));
  // nu = 3/2: (1 + h/alpha) exp(-h/alpha) under this parameterization.
  CHECK(std::abs(matern_covariance(1.0, {1.0, 1.0, 1.5, 0.0}) - 2.0 * std::exp(-1.0)) < 1e-10);
  CHECK_THROWS_AS(matern_covariance(1.0, {0.0, 1.0, 0.5, 0.0}), ParameterError);
  CHECK_THROWS_AS(matern_covariance(1.0, {1.0, -1.0, 0.5, 0.0}), ParameterError);
  CHECK_THROWS_AS(matern_covariance(1.0, {1.0, 1.0, 0.0, 0.0}), ParameterError);
}

TEST_CASE("semivariance identities") {
  const VariogramModel m{1.3, 0.4, 0.6, 0.2};
  CHECK(matern_semivariance(0.0, m) == 0.0);
  CHECK(matern_semivariance(1e300, m) == doctest::Approx(m.sill()));
  CHECK(matern_semivariance(INFINITY, m) == doctest::Approx(m.sill()));
  Philox4x32 rng(3);
  double prev = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double h = 5.0 * rng.uniform();
    CHECK(matern_semivariance(h, m) + matern_covariance(h, m) == doctest::Approx(matern_covariance(0.0, m)));
  }
  for (double h = 1e-6; h < 5.0; h *= 1.1) {
    const double g = matern_semivariance(h, m);
    CHECK(g >= prev);
    CHECK(g <= m.sill() + 1e-15);
    prev = g;
  }
  const VariogramModel e{1.0, 0.5, 0.5, 0.1};
  CHECK(matern_semivariance(0.3, e) == doctest::Approx(0.1 + 1.0 - std::exp(-0.6)).epsilon(1e-14));
}

TEST_CASE("empirical variogram trivial cases") {
  Eigen::MatrixXd s(2, 2);
  s << 0, 0, 1, 0;
  Eigen::VectorXd v(2);
  v << 0, 2;
  const auto ev = empirical_variogram(s, v, 1, 1.5);
  CHECK(ev.semivariances[0] == doctest::Approx(2.0));
  CHECK(ev.counts[0] == 1);

  const Eigen::MatrixXd sites = random_sites(50, 1.0, 1);
  const auto flat = empirical_variogram(sites, Eigen::VectorXd::Constant(50, 3.0), 8, 0.7);
  for (double g : flat.semivariances) CHECK(g == 0.0);
  for (std::size_t b = 1; b < flat.bin_centers.size(); ++b) CHECK(flat.bin_centers[b] > flat.bin_centers[b - 1]);
}

TEST_CASE("empirical variogram tracks the true semivariance of a simulated field") {
  const SiteMatrix grid = regular_grid(Box{0, 4, 0, 4}, 36, 36);
  const Eigen::MatrixXd sites = grid;
  const double alpha = 0.3;
  const int n_bins = 12;
  std::vector<double> mean(n_bins, 0.0);
  std::vector<double> centers;
  const int reps = 4;
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd x = simulate_exponential(sites, 1.0, alpha, 100 + r);
    const auto ev = empirical_variogram(sites, x, n_bins, 1.2);
    centers = ev.bin_centers;
    for (int b = 0; b < n_bins; ++b) mean[b] += ev.semivariances[b] / reps;
  }
  for (int b = 0; b < n_bins; ++b) {
    if (centers[b] < 0.2 || centers[b] > 0.6) continue;  // mid-range band
    const double truth = matern_semivariance(centers[b], {1.0, alpha, 0.5, 0.0});
    CAPTURE(centers[b]);
    CHECK(std::abs(mean[b] - truth) < 0.15 * truth);
  }
}

TEST_CASE("profiled MLE matches the direct likelihood at its optimum") {
  const Eigen::MatrixXd sites = random_sites(120, 2.0, 4);
  const Eigen::VectorXd x = simulate_exponential(sites, 1.0, 0.3, 8);
  FitOptions o;
  o.fix_nu = 0.5;
  const FitResult r = fit_matern_mle(sites, x, o);
  CHECK(r.converged);
  CHECK(r.loglik == doctest::Approx(gaussian_loglik(sites, x, r.model)).epsilon(1e-6));
  // Nearby parameters are no better.
  for (double f : {0.9, 1.1}) {
    VariogramModel a = r.model;
    a.alpha *= f;
    CHECK(gaussian_loglik(sites, x, a) <= r.loglik + 1e-8);
    VariogramModel s = r.model;
    s.sigma2 *= f;
    CHECK(gaussian_loglik(sites, x, s) <= r.loglik + 1e-8);
  }
}

TEST_CASE("MLE recovers exponential parameters on a moderate design") {
  const Eigen::MatrixXd sites = random_sites(400, 2.0, 21);
  FitOptions o;
  o.fix_nu = 0.5;
  std::vector<double> alphas;
  for (int seed = 0; seed < 3; ++seed) {
    const Eigen::VectorXd x = simulate_exponential(sites, 1.0, 0.3, 500 + seed);
    const FitResult r = fit_matern_mle(sites, x, o);
    CHECK(r.model.alpha > 0.15);
    CHECK(r.model.alpha < 0.6);
    CHECK(r.model.sigma2 > 0.5);
    CHECK(r.model.sigma2 < 2.0);
  }
}

TEST_CASE("MLE is equivariant under scaling of the observations") {
  const Eigen::MatrixXd sites = random_sites(60, 2.0, 6);
  const Eigen::VectorXd x = simulate_exponential(sites, 1.0, 0.3, 16);
  const double c = 3.7;

  // Lattice search over the likelihood surface.
  auto lattice_argmax = [&](const Eigen::VectorXd& data, double sigma_scale) {
    double best = -INFINITY;
    std::pair<int, int> arg{-1, -1};
    for (int a = 0; a < 12; ++a) {
      for (int s = 0; s < 12; ++s) {
        const VariogramModel m{sigma_scale * (0.4 + 0.1 * s), 0.1 + 0.05 * a, 0.5, 0.0};
        const double ll = gaussian_loglik(sites, data, m);
        if (ll > best) {
          best = ll;
          arg = {a, s};
        }
      }
    }
    return arg;
  };
  CHECK(lattice_argmax(x, 1.0) == lattice_argmax(c * x, c * c));

  for (bool nugget : {false, true}) {
    FitOptions o;
    o.with_nugget = nugget;
    o.fix_nu = nugget ? std::optional<double>(0.5) : std::nullopt;
    const FitResult r1 = fit_matern_mle(sites, x, o);
    const FitResult r2 = fit_matern_mle(sites, c * x, o);
    CHECK(r2.model.sigma2 == doctest::Approx(c * c * r1.model.sigma2).epsilon(1e-4));
    CHECK(r2.model.alpha == doctest::Approx(r1.model.alpha).epsilon(1e-4));
    CHECK(r2.model.nu == doctest::Approx(r1.model.nu).epsilon(1e-4));
    CHECK(r2.model.nugget == doctest::Approx(c * c * r1.model.nugget).epsilon(1e-3).scale(1e-6));
  }
}

TEST_CASE("white noise is absorbed by the nugget") {
  const Eigen::MatrixXd sites = random_sites(150, 2.0, 7);
  const auto z = standard_normals(77, 150);
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(z.data(), 150);
  FitOptions o;
  o.with_nugget = true;
  o.fix_nu = 0.5;
  const FitResult r = fit_matern_mle(sites, x, o);
  // Either the range collapses below the spacing or the nugget carries the variance.
  const bool small_range = r.model.alpha < 0.05;
  const bool nugget_dominant = r.model.nugget > 0.5 * r.model.sill();
  CHECK((small_range || nugget_dominant));
  CHECK(matern_semivariance(0.1, r.model) > 0.8 * r.model.sill());
}

TEST_CASE("fit preconditions") {
  const Eigen::MatrixXd sites = random_sites(5, 1.0, 1);
  CHECK_THROWS_AS(fit_matern_mle(sites, Eigen::VectorXd::Ones(5)), ParameterError);
}

TEST_CASE("registration horizon") {
  const VariogramModel e{1.0, 0.3, 0.5, 0.0};
  const std::vector<VariogramModel> one{e};
  CHECK(determine_ht(one, 0.05) == doctest::Approx(-0.3 * std::log(0.05)).epsilon(1e-9));
  const VariogramModel e2{2.0, 0.5, 0.5, 0.1};
  const std::vector<VariogramModel> two{e, e2};
  CHECK(determine_ht(two, 0.05) == doctest::Approx(-0.5 * std::log(0.05)).epsilon(1e-9));
  const VariogramModel m{1.0, 0.2, 1.7, 0.0};
  const std::vector<VariogramModel> three{m};
  const double ht = determine_ht(three, 0.05);
  CHECK(matern_semivariance(ht, m) == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("grid sampling") {
  const VariogramModel m{1.0, 0.3, 0.5, 0.2};
  const auto two = sample_on_grid(m, 1.0, 2);
  CHECK(two.values[0] == 0.2);
  CHECK(two.values[1] == doctest::Approx(matern_semivariance(1.0, m)));
  const VariogramModel e{1.0, 0.3, 0.5, 0.0};
  const double ht = -0.3 * std::log(0.05);
  const auto f = sample_on_grid(e, ht, 512);
  CHECK(f.grid.front() == 0.0);
  CHECK(f.grid.back() == ht);
  double worst = 0.0;
  for (std::size_t j = 1; j < f.size(); ++j) {
    CHECK(f.values[j] >= f.values[j - 1]);
    CHECK(std::abs((f.grid[j] - f.grid[j - 1]) - ht / 511) < 1e-12);
    for (double t : {0.25, 0.5, 0.75}) {
      const double h = f.grid[j - 1] + t * (f.grid[j] - f.grid[j - 1]);
      const double lin = f.values[j - 1] + t * (f.values[j] - f.values[j - 1]);
      worst = std::max(worst, std::abs(lin - matern_semivariance(h, e)));
    }
  }
  CHECK(worst < 1e-4 * e.sill());
}
