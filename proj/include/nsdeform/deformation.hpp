#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "nsdeform/geometry.hpp"
#include "nsdeform/registration.hpp"

namespace nsdeform {

/// Segment-length-weighted combination of the regional warps applied to the
/// Euclidean distance between a and b. Zero when a == b.
double global_distance(const Location& a, const Location& b, const Partition& part,
                       std::span<const WarpingFunction> warps);

struct WarpedDistanceMatrix {
  SiteMatrix sites;
  Eigen::MatrixXd values;
  bool has_duplicates = false;  // distinct indices sharing coordinates
};

WarpedDistanceMatrix warped_distance_matrix(const SiteMatrix& sites, const Partition& part,
                                            std::span<const WarpingFunction> warps);

struct DeformedEmbedding {
  Eigen::MatrixXd coords;       // N x (2 + psi), column means zero
  Eigen::VectorXd eigenvalues;  // all eigenvalues of the centred Gram matrix, descending
  int psi = 0;
  int zero_filled = 0;  // trailing dimensions without a positive eigenvalue
  double nmse = 0.0;
  int dimension() const { return static_cast<int>(coords.cols()); }
};

/// Classical (Torgerson) scaling of a distance matrix. The eigendecomposition
/// is computed once; embed() then slices any dimension.
class Cmds {
public:
  explicit Cmds(const Eigen::MatrixXd& distances);

  /// Top-d coordinates; dimensions beyond the positive spectrum are zero.
  DeformedEmbedding embed(int d) const;

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  Eigen::Index positive_count() const;

private:
  Eigen::VectorXd eigenvalues_;   // descending
  Eigen::MatrixXd eigenvectors_;  // columns match eigenvalues_
};

DeformedEmbedding cmds(const WarpedDistanceMatrix& dist, int d);

/// 1 - sum (D_emb - Delta)^2 / sum (Delta - mean Delta)^2 over off-diagonal
/// pairs; equals 1 for a perfect embedding.
double embedding_nmse(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& coords);
double embedding_nmse(const WarpedDistanceMatrix& dist, const DeformedEmbedding& emb);

struct DimensionSelection {
  int psi = 0;
  std::vector<double> nmse;  // index = psi
};

/// NMSE for psi = 0..psi_max; picks the smallest psi within epsilon of the maximum.
DimensionSelection select_dimension(const WarpedDistanceMatrix& dist, int psi_max, double epsilon = 1e-3);
DimensionSelection select_dimension(const Cmds& solver, const Eigen::MatrixXd& delta, int psi_max,
                                    double epsilon = 1e-3);

/// Embeds with 2 + psi dimensions, raising psi while two geographically
/// distinct sites land within tol of each other.
DeformedEmbedding embed_without_folding(const WarpedDistanceMatrix& dist, int psi, double tol = 1e-9,
                                        int psi_limit = 64);
DeformedEmbedding embed_without_folding(const Cmds& solver, const WarpedDistanceMatrix& dist, int psi,
                                        double tol = 1e-9, int psi_limit = 64);

}  // namespace nsdeform
