#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nsdeform/geometry.hpp"

namespace nsdeform {

struct SpatialDataset {
  SiteMatrix sites;
  Eigen::VectorXd values;
  std::size_t dropped_rows = 0;                                  // rows with a missing value
  std::vector<std::pair<Eigen::Index, Eigen::Index>> duplicates;  // index pairs with equal coordinates

  Eigen::Index size() const { return values.size(); }
  SpatialDataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct CsvSchema {
  std::string x = "x";
  std::string y = "y";
  std::string value = "value";
};

/// Reads a headed CSV. Rows with an empty/NA/NaN field are dropped and
/// counted; any other unparseable field is an IoError naming the line.
SpatialDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

enum class TransformStep { Log, ZScore };

struct TransformRecord {
  std::vector<TransformStep> chain;
  double mean = 0.0;  // z-score parameters, when applied
  double sd = 1.0;
};

/// Applies the chain in order; log requires strictly positive values.
std::pair<SpatialDataset, TransformRecord> transform(const SpatialDataset& data,
                                                     const std::vector<TransformStep>& chain);

/// Maps values on the transformed scale back to the original scale.
Eigen::VectorXd inverse_transform(const Eigen::VectorXd& values, const TransformRecord& record);

TransformStep parse_transform_step(const std::string& name);
std::string to_string(TransformStep step);

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Seeded uniform sample of n_test indices without replacement; both lists
/// are returned in increasing order.
SplitIndices split(Eigen::Index n, Eigen::Index n_test, std::uint64_t seed);

}  // namespace nsdeform
