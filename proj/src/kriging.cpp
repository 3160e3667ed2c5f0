#include "nsdeform/kriging.hpp"

#include <algorithm>
#include <cmath>

#include "nsdeform/gp.hpp"

namespace nsdeform {

DeformedCovModel fit_deformed(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values, const FitOptions& opts) {
  const FitResult r = fit_matern_mle(coords, values, opts);
  return {r.model, r.loglik};
}

double ns_cov(const Location& s, const Location& s2, std::span<const WarpingFunction> warps, const Partition& part,
              const DeformedCovModel& model, const SpatialField& sd_field, const SpatialField& nugget_field) {
  const double phi = global_distance(s, s2, part, warps);
  if (!sd_field && !nugget_field) return matern_covariance(phi, model.base);
  const double sd1 = sd_field ? sd_field(s) : std::sqrt(model.base.sigma2);
  const double sd2 = sd_field ? sd_field(s2) : std::sqrt(model.base.sigma2);
  double c = sd1 * sd2 * model.base.correlation(phi);
  if (s == s2) c += nugget_field ? nugget_field(s) : model.base.nugget;
  return c;
}

KrigingOutput krige(const Eigen::MatrixXd& train, const Eigen::VectorXd& values, const Eigen::MatrixXd& test,
                    const VariogramModel& model) {
  model.validate();
  const Eigen::Index n = train.rows();
  if (n < 1 || values.size() != n) throw ParameterError("kriging needs training sites with values");
  if (test.cols() != train.cols()) throw ParameterError("train and test sites differ in dimension");

  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = model.sill();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c(i, j) = c(j, i) = model.sigma2 * model.correlation((train.row(i) - train.row(j)).norm());
    }
  }
  const JitteredCholesky chol = cholesky_with_jitter(c, 1e-10);
  const Eigen::VectorXd weights_x = chol.llt.solve(values);

  KrigingOutput out;
  out.predictions.reserve(static_cast<std::size_t>(test.rows()));
  Eigen::VectorXd k(n);
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    Eigen::Index coincident = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = (test.row(t) - train.row(i)).norm();
      if (h == 0.0 && coincident < 0) coincident = i;
      k[i] = h == 0.0 ? model.sill() : model.sigma2 * model.correlation(h);
    }
    if (coincident >= 0) {
      out.predictions.push_back({t, values[coincident], std::sqrt(model.nugget)});
      continue;
    }
    const double mean = k.dot(weights_x);
    const Eigen::VectorXd z = chol.llt.matrixL().solve(k);
    double var = model.sill() - z.squaredNorm();
    if (var < 0.0) {
      var = 0.0;
      ++out.clamped_variances;
    }
    out.predictions.push_back({t, mean, std::sqrt(var)});
  }
  return out;
}

std::vector<double> correlation_map(const Location& anchor, const SiteMatrix& grid,
                                    std::span<const WarpingFunction> warps, const Partition& part,
                                    const DeformedCovModel& model) {
  const double c0 = model.base.sill();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid.rows()));
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    out.push_back(ns_cov(anchor, grid.row(i).transpose(), warps, part, model) / c0);
  }
  return out;
}

}  // namespace nsdeform
