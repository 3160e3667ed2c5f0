#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "nsdeform/geometry.hpp"

namespace nsdeform {

/// Piecewise-constant kernel field over a partition: region r carries the
/// 2x2 SPD kernel matrix kernels[r] and standard deviation sd[r].
struct KernelField {
  Partition partition;
  std::vector<Eigen::Matrix2d> kernels;
  std::vector<double> sd;
  double nu = 0.5;

  KernelField(Partition part, std::vector<Eigen::Matrix2d> kernels, std::vector<double> sd, double nu);

  /// Same kernel and sd everywhere.
  static KernelField constant(const Box& domain, const Eigen::Matrix2d& kernel, double sd, double nu);

  std::size_t region_of(const Location& s) const { return partition.region_of(s); }
};

/// Paciorek-Schervish nonstationary Matern covariance with
/// Q = (si - sj)^T [(Sigma_i + Sigma_j)/2]^{-1} (si - sj) and argument
/// 2 sqrt(nu Q). For a constant kernel ell^2 I it equals the stationary
/// Matern with range alpha = ell / (2 sqrt(nu)).
double ns_matern_cov(const Location& si, const Location& sj, const KernelField& field);

/// Range parameter of VariogramModel equivalent to an isotropic kernel ell^2 I.
double kernel_to_alpha(double ell_squared, double nu);

/// Dense covariance; symmetric by construction, jitter added to the diagonal.
Eigen::MatrixXd build_cov_matrix(const SiteMatrix& sites, const KernelField& field, double jitter = 1e-10);

struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky with diagonal jitter escalation: tries `jitter`, then x10 up to
/// three more times. Throws NumericalError if all fail.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& cov, double jitter = 1e-10);

struct Realization {
  SiteMatrix sites;
  Eigen::VectorXd values;
  std::uint64_t seed = 0;
};

/// L z with z drawn from the Philox stream for `seed`.
Realization simulate(const SiteMatrix& sites, const KernelField& field, std::uint64_t seed);

/// Row-major nx-by-ny regular grid including the domain corners.
SiteMatrix regular_grid(const Box& domain, int nx, int ny);

}  // namespace nsdeform
