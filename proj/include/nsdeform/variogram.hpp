#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nsdeform/errors.hpp"

namespace nsdeform {

/// Isotropic Matern model with optional nugget.
///
/// Correlation at lag h is (2^{1-nu}/Gamma(nu)) (h/alpha)^nu K_nu(h/alpha), so
/// nu = 1/2 gives exp(-h/alpha). Covariance is sigma2 * correlation for h > 0
/// and sigma2 + nugget at h = 0.
struct VariogramModel {
  double sigma2 = 1.0;
  double alpha = 1.0;
  double nu = 0.5;
  double nugget = 0.0;

  /// Throws ParameterError unless sigma2, alpha, nu > 0 and nugget >= 0.
  void validate() const;
  double sill() const { return sigma2 + nugget; }
  double correlation(double h) const;
};

double matern_covariance(double h, const VariogramModel& model);
double matern_semivariance(double h, const VariogramModel& model);

struct EmpiricalVariogram {
  std::vector<double> bin_centers;
  std::vector<double> semivariances;
  std::vector<std::int64_t> counts;
};

/// Matheron moment estimator over n_bins equal-width bins on (0, max_dist].
/// coords is n x d.
EmpiricalVariogram empirical_variogram(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                                       int n_bins, double max_dist);

struct FitOptions {
  std::optional<double> fix_nu;
  bool with_nugget = false;
  int n_starts = 5;
  int min_sites = 10;
  int max_evaluations = 2000;
  std::uint64_t seed = 0x5EED;
};

struct FitResult {
  VariogramModel model;
  double loglik = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Raised when no multi-start run converges; carries the best iterate.
class FitError : public NumericalError {
public:
  FitError(const std::string& what, FitResult best) : NumericalError(what), best_(best) {}
  const FitResult& best() const { return best_; }

private:
  FitResult best_;
};

/// Zero-mean Gaussian log-likelihood of values under the model at the given
/// sites; -infinity when the covariance is not numerically positive definite.
double gaussian_loglik(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                       const VariogramModel& model);

/// Maximum-likelihood Matern(+nugget) fit for zero-mean data at n x d sites.
///
/// The variance is profiled out analytically; the remaining log-parameters
/// (range, smoothness unless fixed, nugget-to-variance ratio when enabled)
/// are searched with Nelder-Mead from Latin-hypercube starting points.
FitResult fit_matern_mle(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                         const FitOptions& opts = {});

/// Smallest lag at which every model's continuous part reaches (1 - rel_tol)
/// of its partial sill, i.e. correlation has dropped to rel_tol.
double determine_ht(std::span<const VariogramModel> models, double rel_tol = 0.05);

/// Values on m equally spaced abscissae spanning [0, upper].
struct SampledFunction {
  std::vector<double> grid;
  std::vector<double> values;

  std::size_t size() const { return grid.size(); }
  double upper() const { return grid.back(); }
};

std::vector<double> uniform_grid(double upper, std::size_t m);

/// Semivariance on a uniform grid of [0, h_t]; the first value is the h -> 0+
/// limit (the nugget) rather than gamma(0) = 0.
SampledFunction sample_on_grid(const VariogramModel& model, double h_t, std::size_t m);

}  // namespace nsdeform
