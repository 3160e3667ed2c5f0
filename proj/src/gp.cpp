#include "nsdeform/gp.hpp"

#include <Eigen/LU>
#include <cmath>

#include "nsdeform/errors.hpp"
#include "nsdeform/random.hpp"
#include "nsdeform/special.hpp"

namespace nsdeform {

KernelField::KernelField(Partition part, std::vector<Eigen::Matrix2d> kernels_, std::vector<double> sd_, double nu_)
    : partition(std::move(part)), kernels(std::move(kernels_)), sd(std::move(sd_)), nu(nu_) {
  if (kernels.size() != partition.size() || sd.size() != partition.size()) {
    throw ParameterError("kernel field needs one kernel and one sd per region");
  }
  if (!(nu > 0.0)) throw ParameterError("smoothness must be positive");
  for (std::size_t r = 0; r < kernels.size(); ++r) {
    const Eigen::Matrix2d& k = kernels[r];
    if (std::abs(k(0, 1) - k(1, 0)) > 1e-14 * k.norm() || !(k(0, 0) > 0.0) || !(k.determinant() > 0.0)) {
      throw ParameterError("kernel matrix of region " + std::to_string(r) + " is not SPD");
    }
    if (!(sd[r] > 0.0)) throw ParameterError("standard deviation must be positive");
  }
}

KernelField KernelField::constant(const Box& domain, const Eigen::Matrix2d& kernel, double sd, double nu) {
  return KernelField(Partition({domain}), {kernel}, {sd}, nu);
}

double kernel_to_alpha(double ell_squared, double nu) { return std::sqrt(ell_squared) / (2.0 * std::sqrt(nu)); }

double ns_matern_cov(const Location& si, const Location& sj, const KernelField& field) {
  const std::size_t ri = field.region_of(si);
  const std::size_t rj = field.region_of(sj);
  const double sdi = field.sd[ri];
  const double sdj = field.sd[rj];
  if (si == sj) return sdi * sdi;
  const Eigen::Matrix2d& ki = field.kernels[ri];
  const Eigen::Matrix2d& kj = field.kernels[rj];
  const Eigen::Matrix2d avg = 0.5 * (ki + kj);
  const double det_avg = avg.determinant();
  if (!(det_avg > 0.0)) throw NumericalError("averaged kernel matrix is singular");
  const Eigen::Vector2d diff = si - sj;
  const double q = diff.dot(avg.inverse() * diff);
  const double prefactor = std::pow(ki.determinant(), 0.25) * std::pow(kj.determinant(), 0.25) / std::sqrt(det_avg);
  return sdi * sdj * prefactor * matern_correlation(2.0 * std::sqrt(field.nu * q), field.nu);
}

Eigen::MatrixXd build_cov_matrix(const SiteMatrix& sites, const KernelField& field, double jitter) {
  const Eigen::Index n = sites.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Location si = sites.row(i).transpose();
    c(i, i) = ns_matern_cov(si, si, field) + jitter;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c(i, j) = c(j, i) = ns_matern_cov(si, sites.row(j).transpose(), field);
    }
  }
  return c;
}

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& cov, double jitter) {
  JitteredCholesky out;
  double extra = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += extra;
    out.llt.compute(c);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = extra;
      return out;
    }
    extra = extra == 0.0 ? jitter : extra * 10.0;
  }
  throw NumericalError("covariance matrix is not positive definite after jitter escalation");
}

Realization simulate(const SiteMatrix& sites, const KernelField& field, std::uint64_t seed) {
  const Eigen::MatrixXd cov = build_cov_matrix(sites, field);
  const JitteredCholesky chol = cholesky_with_jitter(cov);
  const std::vector<double> z = standard_normals(seed, static_cast<std::size_t>(sites.rows()));
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  return {sites, chol.llt.matrixL() * zv, seed};
}

SiteMatrix regular_grid(const Box& domain, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ParameterError("grid needs at least 2 points per axis");
  SiteMatrix s(static_cast<Eigen::Index>(nx) * ny, 2);
  Eigen::Index k = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      s(k, 0) = i == nx - 1 ? domain.xmax : domain.xmin + (domain.xmax - domain.xmin) * i / (nx - 1);
      s(k, 1) = j == ny - 1 ? domain.ymax : domain.ymin + (domain.ymax - domain.ymin) * j / (ny - 1);
      ++k;
    }
  }
  return s;
}

}  // namespace nsdeform
