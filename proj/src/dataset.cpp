#include "nsdeform/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "nsdeform/errors.hpp"
#include "nsdeform/random.hpp"

namespace nsdeform {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

}  // namespace

SpatialDataset SpatialDataset::subset(const std::vector<Eigen::Index>& rows) const {
  SpatialDataset out;
  out.sites.resize(static_cast<Eigen::Index>(rows.size()), 2);
  out.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.sites.row(static_cast<Eigen::Index>(k)) = sites.row(rows[k]);
    out.values[static_cast<Eigen::Index>(k)] = values[rows[k]];
  }
  return out;
}

SpatialDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("data file " + path.string() + " is empty");
  const auto header = split_fields(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("column '" + name + "' not found in " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = column(schema.x), cy = column(schema.y), cv = column(schema.value);

  std::vector<double> xs, ys, vs;
  std::size_t dropped = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    double parsed[3];
    bool missing = false;
    const std::size_t cols[3] = {cx, cy, cv};
    for (int k = 0; k < 3; ++k) {
      if (cols[k] >= fields.size() || is_missing(fields[cols[k]])) {
        missing = true;
        continue;
      }
      const std::string& f = fields[cols[k]];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), parsed[k]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(parsed[k])) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": cannot parse '" + f + "'");
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    xs.push_back(parsed[0]);
    ys.push_back(parsed[1]);
    vs.push_back(parsed[2]);
  }
  if (vs.empty()) throw IoError("no usable rows in " + path.string());

  SpatialDataset d;
  const auto n = static_cast<Eigen::Index>(vs.size());
  d.sites.resize(n, 2);
  d.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.sites(i, 0) = xs[i];
    d.sites(i, 1) = ys[i];
    d.values[i] = vs[i];
  }
  d.dropped_rows = dropped;
  std::map<std::pair<double, double>, Eigen::Index> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [it, inserted] = seen.emplace(std::make_pair(xs[i], ys[i]), i);
    if (!inserted) d.duplicates.emplace_back(it->second, i);
  }
  return d;
}

TransformStep parse_transform_step(const std::string& name) {
  if (name == "log") return TransformStep::Log;
  if (name == "zscore") return TransformStep::ZScore;
  throw ConfigError("unknown transform '" + name + "' (expected log or zscore)");
}

std::string to_string(TransformStep step) { return step == TransformStep::Log ? "log" : "zscore"; }

std::pair<SpatialDataset, TransformRecord> transform(const SpatialDataset& data,
                                                     const std::vector<TransformStep>& chain) {
  SpatialDataset out = data;
  TransformRecord rec;
  rec.chain = chain;
  for (const TransformStep step : chain) {
    if (step == TransformStep::Log) {
      std::ostringstream bad;
      int count = 0;
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (!(out.values[i] > 0.0)) {
          if (count++ < 10) bad << ' ' << i;
        }
      }
      if (count > 0) {
        throw ParameterError("log transform needs positive values; offending sites:" + bad.str() +
                             (count > 10 ? " ..." : ""));
      }
      out.values = out.values.array().log();
    } else {
      const double n = static_cast<double>(out.size());
      rec.mean = out.values.mean();
      const double var = (out.values.array() - rec.mean).square().sum() / std::max(1.0, n - 1.0);
      rec.sd = std::sqrt(var);
      if (!(rec.sd > 0.0)) throw ParameterError("z-score of constant values");
      out.values = (out.values.array() - rec.mean) / rec.sd;
    }
  }
  return {out, rec};
}

Eigen::VectorXd inverse_transform(const Eigen::VectorXd& values, const TransformRecord& record) {
  Eigen::VectorXd v = values;
  for (auto it = record.chain.rbegin(); it != record.chain.rend(); ++it) {
    if (*it == TransformStep::ZScore) {
      v = (v.array() * record.sd + record.mean).matrix();
    } else {
      v = v.array().exp().matrix();
    }
  }
  return v;
}

SplitIndices split(Eigen::Index n, Eigen::Index n_test, std::uint64_t seed) {
  if (n_test < 0 || n_test >= n) throw ParameterError("n_test must lie in [0, n)");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Philox4x32 rng(seed, 0x5B117);
  // Partial Fisher-Yates: the first n_test entries form the test sample.
  for (Eigen::Index i = 0; i < n_test; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  SplitIndices out;
  out.test.assign(idx.begin(), idx.begin() + n_test);
  out.train.assign(idx.begin() + n_test, idx.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

}  // namespace nsdeform
