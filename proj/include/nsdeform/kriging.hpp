#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "nsdeform/deformation.hpp"
#include "nsdeform/variogram.hpp"

namespace nsdeform {

/// Stationary isotropic Matern(+nugget) model whose lags are distances in
/// the deformed space.
struct DeformedCovModel {
  VariogramModel base;
  double loglik = 0.0;
};

/// MLE fit on deformed-space coordinates (n x d).
DeformedCovModel fit_deformed(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                              const FitOptions& opts = {});

using SpatialField = std::function<double(const Location&)>;

/// C_D(phi(s, s2)); when sd or nugget fields are given,
/// sd(s) sd(s2) rho_D(phi(s, s2)) + nugget(s) 1{s = s2}.
double ns_cov(const Location& s, const Location& s2, std::span<const WarpingFunction> warps,
              const Partition& part, const DeformedCovModel& model, const SpatialField& sd_field = {},
              const SpatialField& nugget_field = {});

struct Prediction {
  Eigen::Index site = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct KrigingOutput {
  std::vector<Prediction> predictions;
  int clamped_variances = 0;  // negative variances clamped to zero
};

/// Simple kriging of zero-mean data. train and test are point sets in the
/// same space (n x d and m x d); one Cholesky of the training covariance is
/// shared by all test sites. A test site coinciding with a training site
/// returns that observation with sd = sqrt(nugget).
KrigingOutput krige(const Eigen::MatrixXd& train, const Eigen::VectorXd& values, const Eigen::MatrixXd& test,
                    const VariogramModel& model);

/// Correlation of the anchor with every grid site under the deformed model.
std::vector<double> correlation_map(const Location& anchor, const SiteMatrix& grid,
                                    std::span<const WarpingFunction> warps, const Partition& part,
                                    const DeformedCovModel& model);

}  // namespace nsdeform
