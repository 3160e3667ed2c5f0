#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>

#include "nsdeform/dataset.hpp"
#include "nsdeform/errors.hpp"

using namespace nsdeform;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "nsdeform_dataset_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

SpatialDataset values_of(std::initializer_list<double> v) {
  SpatialDataset d;
  d.values = Eigen::VectorXd(static_cast<Eigen::Index>(v.size()));
  d.sites = SiteMatrix::Zero(d.values.size(), 2);
  Eigen::Index i = 0;
  for (double x : v) {
    d.sites(i, 0) = static_cast<double>(i);
    d.values[i++] = x;
  }
  return d;
}

}  // namespace

TEST_CASE("reading a well-formed file") {
  const auto d = ingest_csv(write_temp("ok.csv", "x,y,value\n0,0,1.5\n1,0.5,2\n0.25,1,-3e-1\n"));
  CHECK(d.size() == 3);
  CHECK(d.sites(2, 0) == 0.25);
  CHECK(d.values[2] == -0.3);
  CHECK(d.dropped_rows == 0);
  CHECK(d.duplicates.empty());
}

TEST_CASE("custom column names and extra columns") {
  const auto d = ingest_csv(write_temp("named.csv", "id,lon,lat,prcp\na,1,2,3\nb,4,5,6\n"), CsvSchema{"lon", "lat", "prcp"});
  CHECK(d.size() == 2);
  CHECK(d.sites(1, 1) == 5.0);
  CHECK(d.values[1] == 6.0);
  CHECK_THROWS_AS(ingest_csv(write_temp("named2.csv", "a,b\n1,2\n")), IoError);
}

TEST_CASE("missing values are dropped and counted") {
  const auto d = ingest_csv(write_temp("missing.csv", "x,y,value\n0,0,1\n1,1,\n2,2,NA\n3,3,4\n"));
  CHECK(d.size() == 2);
  CHECK(d.dropped_rows == 2);
}

TEST_CASE("unparseable rows name the line") {
  try {
    ingest_csv(write_temp("bad.csv", "x,y,value\n0,0,1\n1,abc,2\n"));
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK_THROWS_AS(ingest_csv(write_temp("empty.csv", "x,y,value\n")), IoError);
  CHECK_THROWS_AS(ingest_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("duplicate coordinates are flagged") {
  const auto d = ingest_csv(write_temp("dup.csv", "x,y,value\n0,0,1\n1,1,2\n0,0,3\n"));
  REQUIRE(d.duplicates.size() == 1);
  CHECK(d.duplicates[0].first == 0);
  CHECK(d.duplicates[0].second == 2);
}

TEST_CASE("transforms") {
  const auto d = values_of({1.0, std::numbers::e, std::exp(2.0)});
  const auto [logged, rec] = transform(d, {TransformStep::Log});
  for (int i = 0; i < 3; ++i) CHECK(logged.values[i] == doctest::Approx(i).epsilon(1e-15));

  const auto [same, none] = transform(d, {});
  CHECK(same.values == d.values);

  const auto raw = values_of({3.0, 7.5, -1.0, 4.2, 0.3});
  const auto [z, zr] = transform(raw, {TransformStep::ZScore});
  CHECK(std::abs(z.values.mean()) < 1e-14);
  const double var = (z.values.array() - z.values.mean()).square().sum() / 4.0;
  CHECK(var == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((inverse_transform(z.values, zr) - raw.values).cwiseAbs().maxCoeff() < 1e-12);

  const auto pos = values_of({2.0, 5.0, 11.0, 0.4});
  const auto [lz, lzr] = transform(pos, {TransformStep::Log, TransformStep::ZScore});
  CHECK((inverse_transform(lz.values, lzr) - pos.values).cwiseAbs().maxCoeff() < 1e-12);

  try {
    transform(values_of({1.0, 0.0, -2.0}), {TransformStep::Log});
    FAIL("expected an error");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('1') != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);
  }
  CHECK(parse_transform_step("log") == TransformStep::Log);
  CHECK(to_string(TransformStep::ZScore) == "zscore");
  CHECK_THROWS_AS(parse_transform_step("sqrt"), ConfigError);
}

TEST_CASE("train/test split") {
  const auto s = split(254, 30, 1992);
  CHECK(s.train.size() == 224);
  CHECK(s.test.size() == 30);
  std::set<Eigen::Index> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 254);
  CHECK(std::is_sorted(s.test.begin(), s.test.end()));
  const auto again = split(254, 30, 1992);
  CHECK(again.test == s.test);
  CHECK(split(254, 30, 1993).test != s.test);
  CHECK_THROWS_AS(split(10, 10, 1), ParameterError);
  CHECK_THROWS_AS(split(10, -1, 1), ParameterError);
  CHECK(split(10, 0, 1).train.size() == 10);
}

TEST_CASE("split frequencies are uniform over seeds") {
  const int n = 50, n_test = 10, runs = 100;
  std::vector<int> counts(n, 0);
  for (int seed = 0; seed < runs; ++seed)
    for (auto i : split(n, n_test, static_cast<std::uint64_t>(seed)).test) ++counts[static_cast<std::size_t>(i)];
  const double expected = static_cast<double>(runs) * n_test / n;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(n - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}
