#include <doctest.h>

#include <Eigen/LU>
#include <cmath>
#include <random>

#include "nsdeform/errors.hpp"
#include "nsdeform/geometry.hpp"
#include "nsdeform/kriging.hpp"

using namespace nsdeform;

namespace {

Eigen::MatrixXd cov_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const VariogramModel& m) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) c(i, j) = matern_covariance((a.row(i) - b.row(j)).norm(), m);
  return c;
}

Eigen::MatrixXd random_sites(std::mt19937_64& rng, int n, int d = 2) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  Eigen::MatrixXd s(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) s(i, k) = u(rng);
  return s;
}

}  // namespace

TEST_CASE("five-site kriging matches an explicit-inverse oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  for (const VariogramModel m : {VariogramModel{1.0, 0.4, 0.5, 0.0}, VariogramModel{1.7, 0.25, 1.3, 0.1},
                                 VariogramModel{0.6, 0.8, 0.6, 0.0}}) {
    const Eigen::MatrixXd train = random_sites(rng, 5);
    const Eigen::MatrixXd test = random_sites(rng, 7);
    Eigen::VectorXd x(5);
    for (auto& v : x) v = z(rng);
    const Eigen::MatrixXd cinv = cov_matrix(train, train, m).inverse();
    const Eigen::MatrixXd k = cov_matrix(train, test, m);
    const auto out = krige(train, x, test, m);
    REQUIRE(out.predictions.size() == 7);
    for (Eigen::Index t = 0; t < 7; ++t) {
      const double mean = k.col(t).dot(cinv * x);
      const double var = m.sill() - k.col(t).dot(cinv * k.col(t));
      CHECK(std::abs(out.predictions[t].mean - mean) < 1e-10);
      CHECK(std::abs(out.predictions[t].sd - std::sqrt(var)) < 1e-10);
    }
  }
}

TEST_CASE("exact interpolation at training sites") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd train = random_sites(rng, 20);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, -1.0, 2.0);
  const auto out = krige(train, x, train, VariogramModel{1.0, 0.3, 0.6, 0.0});
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(out.predictions[i].mean == x[i]);
    CHECK(out.predictions[i].sd == 0.0);
  }
  const auto noisy = krige(train, x, train.topRows(2), VariogramModel{1.0, 0.3, 0.6, 0.25});
  CHECK(noisy.predictions[1].sd == doctest::Approx(0.5));
}

TEST_CASE("one training site closed form") {
  const VariogramModel m{2.0, 0.5, 0.5, 0.0};
  Eigen::MatrixXd train(1, 2), test(1, 2);
  train << 0.0, 0.0;
  test << 0.3, 0.4;
  Eigen::VectorXd x(1);
  x << 1.7;
  const auto p = krige(train, x, test, m).predictions[0];
  const double rho = std::exp(-0.5 / 0.5);
  CHECK(p.mean == doctest::Approx(rho * 1.7).epsilon(1e-12));
  CHECK(p.sd * p.sd == doctest::Approx(2.0 * (1 - rho * rho)).epsilon(1e-12));
}

TEST_CASE("kriging variance bounds and screening monotonicity") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 20; ++rep) {
    const VariogramModel m{1.0, 0.1 + 0.05 * rep, 0.5 + 0.1 * (rep % 5), rep % 2 ? 0.05 : 0.0};
    const Eigen::MatrixXd all = random_sites(rng, 30);
    const Eigen::MatrixXd test = random_sites(rng, 15);
    Eigen::VectorXd x(30);
    for (auto& v : x) v = z(rng);
    double prev[15];
    for (int n = 5; n <= 30; n += 5) {
      const auto out = krige(all.topRows(n), x.head(n), test, m);
      for (int t = 0; t < 15; ++t) {
        const double sd = out.predictions[t].sd;
        CHECK(sd >= 0.0);
        CHECK(sd <= std::sqrt(m.sill()) + 1e-8);
        if (n > 5) CHECK(sd <= prev[t] + 1e-9);
        prev[t] = sd;
      }
    }
  }
}

TEST_CASE("identity warps make the deformed covariance the geographic one") {
  const Partition part = Partition::vertical_split(Box{0, 2, 0, 2}, 1.0);
  const std::vector<WarpingFunction> warps(2, WarpingFunction::identity(1.5, 64));
  const DeformedCovModel model{VariogramModel{1.3, 0.3, 0.6, 0.2}, 0.0};
  const Location a{0.4, 0.4}, b{1.6, 1.1};
  CHECK(ns_cov(a, a, warps, part, model) == doctest::Approx(1.5));
  CHECK(std::abs(ns_cov(a, b, warps, part, model) - matern_covariance((a - b).norm(), model.base)) < 1e-12);

  // sd = 1 and zero nugget: the correlation itself.
  const SpatialField one = [](const Location&) { return 1.0; };
  const SpatialField zero = [](const Location&) { return 0.0; };
  CHECK(std::abs(ns_cov(a, b, warps, part, model, one, zero) - model.base.correlation((a - b).norm())) < 1e-14);
  CHECK(ns_cov(a, a, warps, part, model, one, zero) == doctest::Approx(1.0));
  const SpatialField sd_field = [](const Location& s) { return 1.0 + s.x(); };
  CHECK(ns_cov(a, b, warps, part, model, sd_field, zero) ==
        doctest::Approx(1.4 * 2.6 * model.base.correlation((a - b).norm())));

  // Kriging on identity-warp embedded coordinates equals geographic kriging.
  std::mt19937_64 rng(9);
  const SiteMatrix sites = random_sites(rng, 40);
  const auto dist = warped_distance_matrix(sites, part, warps);
  const DeformedEmbedding emb = cmds(dist, 2);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(30, -1.0, 1.0);
  const auto geo = krige(sites.topRows(30), x, sites.bottomRows(10), model.base);
  const auto def = krige(emb.coords.topRows(30), x, emb.coords.bottomRows(10), model.base);
  for (int t = 0; t < 10; ++t) {
    CHECK(std::abs(geo.predictions[t].mean - def.predictions[t].mean) < 1e-8);
    CHECK(std::abs(geo.predictions[t].sd - def.predictions[t].sd) < 1e-8);
  }
}

TEST_CASE("correlation map") {
  const Partition part = Partition::vertical_split(Box{0, 2, 0, 2}, 1.0);
  const std::vector<WarpingFunction> warps(2, WarpingFunction::identity(1.5, 64));
  const DeformedCovModel model{VariogramModel{1.0, 0.3, 0.6, 0.0}, 0.0};
  SiteMatrix grid(5, 2);
  grid << 1.0, 1.0, 1.3, 1.0, 0.7, 1.0, 1.0, 1.3, 1.0, 0.7;
  const auto rho = correlation_map(Location{1.0, 1.0}, grid, warps, part, model);
  CHECK(rho[0] == doctest::Approx(1.0));
  for (int i = 2; i < 5; ++i) CHECK(rho[i] == doctest::Approx(rho[1]).epsilon(1e-12));
  for (double r : rho) CHECK((r >= -1.0 && r <= 1.0));
}

TEST_CASE("kriging input validation") {
  Eigen::MatrixXd train(2, 2), test(1, 3);
  train << 0, 0, 1, 1;
  test << 0, 0, 0;
  Eigen::VectorXd x(2);
  x << 1, 2;
  CHECK_THROWS_AS(krige(train, x, test, VariogramModel{}), ParameterError);
  CHECK_THROWS_AS(krige(train, x, train, VariogramModel{-1.0, 1.0, 0.5, 0.0}), ParameterError);
}
