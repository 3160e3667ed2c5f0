#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsdeform/dataset.hpp"
#include "nsdeform/deformation.hpp"
#include "nsdeform/geometry.hpp"
#include "nsdeform/kriging.hpp"
#include "nsdeform/registration.hpp"
#include "nsdeform/scoring.hpp"
#include "nsdeform/variogram.hpp"

namespace nsdeform {

enum class Mode { Simulate, Ingest };

struct ScenarioRegion {
  Box box;
  Eigen::Matrix2d kernel = Eigen::Matrix2d::Identity();
  double sd = 1.0;
};

struct ScenarioConfig {
  Box domain{0.0, 2.0, 0.0, 2.0};
  int nx = 30;
  int ny = 30;
  double nu = 0.6;
  std::vector<ScenarioRegion> regions;
};

struct GridSpec {
  Box box;
  int nx = 0;
  int ny = 0;
};

struct RunConfig {
  Mode mode = Mode::Simulate;
  std::optional<std::uint64_t> seed;
  ScenarioConfig scenario;
  std::filesystem::path data_path;
  CsvSchema schema;
  std::vector<TransformStep> transform;
  std::vector<Box> partition;

  FitOptions fit;          // regional variogram fits
  int n_bins = 15;
  std::optional<double> max_dist;

  std::size_t grid_m = 512;
  std::optional<double> bandwidth;
  double ht_rel_tol = 0.05;
  RegistrationOptions registration;

  int psi_max = 10;
  double epsilon = 1e-3;
  std::optional<int> psi;  // fixes the extra dimensions instead of selecting them

  FitOptions krige_fit;    // deformed-space and stationary-baseline fits

  Eigen::Index n_test = 0;
  std::optional<std::uint64_t> split_seed;

  std::optional<GridSpec> prediction_grid;
  std::vector<Location> correlation_anchors;
  std::optional<GridSpec> correlation_grid;

  std::filesystem::path output_dir = "out";

  /// Canonical JSON text of the parsed configuration, used for hashing.
  std::string canonical;

  std::uint64_t effective_seed() const;
  std::uint64_t effective_split_seed() const;
};

/// Parses a JSON run configuration. Relative data paths are resolved
/// against base_dir. Throws ConfigError on any schema violation.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a digest.
std::uint64_t fnv1a64(const std::string& bytes);

enum class Stage { Data = 0, Fit, Register, Embed, Krige, Score, Maps };
std::string to_string(Stage stage);

struct SiteSet {
  SiteMatrix sites;  // train, then test, then prediction grid
  std::vector<Eigen::Index> ids;
  Eigen::Index n_train = 0;
  Eigen::Index n_test = 0;
  Eigen::Index n_grid = 0;
};

struct RegionalFit {
  std::size_t region = 0;
  Eigen::Index n_sites = 0;
  FitResult fit;
  EmpiricalVariogram empirical;
};

struct ModelPredictions {
  KrigingOutput output;
  ScoreReport scores;
};

struct CorrelationMap {
  Location anchor;
  SiteMatrix grid;
  std::vector<double> rho;
};

struct PipelineResult {
  SpatialDataset data;  // transformed scale
  TransformRecord transform;
  SplitIndices split;
  std::vector<RegionalFit> fits;
  double h_t = 0.0;
  double bandwidth = 0.0;
  RegistrationResult registration;
  std::vector<WarpingFunction> warps;  // smoothed, extended by identity
  SiteSet sites;
  DimensionSelection selection;
  DeformedEmbedding embedding;
  DeformedCovModel deformed_model;
  FitResult stationary_fit;
  ModelPredictions nonstationary;
  ModelPredictions stationary;
  std::vector<CorrelationMap> maps;
  std::map<std::string, double> timings;  // seconds per stage
  Stage completed = Stage::Data;
};

struct PipelineOptions {
  Stage last = Stage::Maps;
  std::optional<std::filesystem::path> output_dir;  // no export when empty
  std::function<void(const std::string&)> log;
};

/// Runs the stage chain up to opts.last. Library errors are rethrown with the
/// failing stage prepended to the message, keeping their category; artifacts
/// of completed stages stay on disk.
PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& opts = {});

/// Writes the summary tables derived from a manifest's artifacts: scores and
/// regional fits. Returns the text also written to report.txt.
std::string write_report(const std::filesystem::path& manifest_path);

}  // namespace nsdeform
