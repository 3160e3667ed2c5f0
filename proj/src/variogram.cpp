#include "nsdeform/variogram.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "nsdeform/optim.hpp"
#include "nsdeform/random.hpp"
#include "nsdeform/special.hpp"

namespace nsdeform {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kFitJitter = 1e-10;

// Upper-triangle pair distances collapsed onto their distinct values, so the
// correlation only has to be evaluated once per distinct lag.
struct LagTable {
  std::vector<double> lags;
  std::vector<std::uint32_t> index;  // row-major upper triangle, i < j
  double max_lag = 0.0;
  double median_lag = 0.0;
};

LagTable build_lags(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) all.push_back((coords.row(i) - coords.row(j)).norm());
  }
  LagTable t;
  t.lags = all;
  std::sort(t.lags.begin(), t.lags.end());
  if (!all.empty()) {
    t.max_lag = t.lags.back();
    t.median_lag = t.lags[t.lags.size() / 2];
  }
  t.lags.erase(std::unique(t.lags.begin(), t.lags.end()), t.lags.end());
  t.index.resize(all.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    t.index[k] = static_cast<std::uint32_t>(
        std::lower_bound(t.lags.begin(), t.lags.end(), all[k]) - t.lags.begin());
  }
  return t;
}

struct ProfiledLik {
  double loglik = kNegInf;
  double sigma2 = 0.0;
};

// Profile likelihood with C = sigma2 (R + tau I); sigma2 maximised in closed form.
ProfiledLik profiled_loglik(const LagTable& lags, const Eigen::VectorXd& x, double alpha, double nu,
                            double tau, Eigen::MatrixXd& work, std::vector<double>& rho) {
  const Eigen::Index n = x.size();
  rho.resize(lags.lags.size());
  for (std::size_t k = 0; k < lags.lags.size(); ++k) rho[k] = matern_correlation(lags.lags[k] / alpha, nu);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    work(i, i) = 1.0 + tau + kFitJitter;
    for (Eigen::Index j = i + 1; j < n; ++j) work(j, i) = rho[lags.index[k++]];
  }
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(work);
  if (llt.info() != Eigen::Success) return {};
  const auto& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  const Eigen::VectorXd z = llt.matrixL().solve(x);
  const double quad = z.squaredNorm();
  if (!(quad > 0.0)) return {};
  const double s2 = quad / static_cast<double>(n);
  const double ll = -0.5 * n * (std::log(2.0 * std::numbers::pi * s2) + 1.0) - 0.5 * logdet;
  if (!std::isfinite(ll)) return {};
  return {ll, s2};
}

}  // namespace

void VariogramModel::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ParameterError("sigma2 must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ParameterError("nu must be positive");
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw ParameterError("nugget must be non-negative");
}

double VariogramModel::correlation(double h) const { return matern_correlation(h / alpha, nu); }

double matern_covariance(double h, const VariogramModel& model) {
  model.validate();
  if (h < 0.0) throw ParameterError("lag must be non-negative");
  if (h == 0.0) return model.sill();
  return model.sigma2 * model.correlation(h);
}

double matern_semivariance(double h, const VariogramModel& model) {
  model.validate();
  if (h < 0.0) throw ParameterError("lag must be non-negative");
  if (h == 0.0) return 0.0;
  if (std::isinf(h)) return model.sill();
  return model.nugget + model.sigma2 * (1.0 - model.correlation(h));
}

EmpiricalVariogram empirical_variogram(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                                       int n_bins, double max_dist) {
  if (coords.rows() < 2 || coords.rows() != values.size()) {
    throw ParameterError("empirical variogram needs at least two sites with one value each");
  }
  if (!(max_dist > 0.0) || n_bins < 1) throw ParameterError("need max_dist > 0 and n_bins >= 1");
  const double width = max_dist / n_bins;
  std::vector<double> sums(n_bins, 0.0);
  EmpiricalVariogram out;
  out.counts.assign(n_bins, 0);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < coords.rows(); ++j) {
      const double h = (coords.row(i) - coords.row(j)).norm();
      if (h > max_dist) continue;
      const int b = std::min(n_bins - 1, static_cast<int>(h / width));
      const double diff = values[i] - values[j];
      sums[b] += diff * diff;
      ++out.counts[b];
    }
  }
  for (int b = 0; b < n_bins; ++b) {
    out.bin_centers.push_back((b + 0.5) * width);
    out.semivariances.push_back(out.counts[b] > 0 ? sums[b] / (2.0 * out.counts[b]) : 0.0);
  }
  return out;
}

double gaussian_loglik(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                       const VariogramModel& model) {
  model.validate();
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = model.sill();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c(j, i) = c(i, j) = model.sigma2 * model.correlation((coords.row(i) - coords.row(j)).norm());
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) return kNegInf;
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double quad = llt.matrixL().solve(values).squaredNorm();
  return -0.5 * logdet - 0.5 * quad - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

FitResult fit_matern_mle(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                         const FitOptions& opts) {
  const Eigen::Index n = coords.rows();
  if (n != values.size()) throw ParameterError("coords and values differ in length");
  if (n < std::max(2, opts.min_sites)) {
    throw ParameterError("too few sites for a variogram fit: " + std::to_string(n));
  }
  if (opts.fix_nu && !(*opts.fix_nu > 0.0)) throw ParameterError("fixed nu must be positive");
  if (opts.n_starts < 1) throw ParameterError("n_starts must be >= 1");

  const LagTable lags = build_lags(coords);
  if (!(lags.max_lag > 0.0)) throw ParameterError("all sites coincide");
  const double scale = lags.max_lag;

  // Parameter vector layout: log alpha, [log nu], [log tau].
  const bool free_nu = !opts.fix_nu.has_value();
  const int dim = 1 + (free_nu ? 1 : 0) + (opts.with_nugget ? 1 : 0);
  const double log_alpha_lo = std::log(1e-4 * scale), log_alpha_hi = std::log(10.0 * scale);
  const double log_nu_lo = std::log(0.05), log_nu_hi = std::log(10.0);
  const double log_tau_lo = std::log(1e-8), log_tau_hi = std::log(1e3);

  struct Decoded {
    double alpha, nu, tau;
  };
  auto decode = [&](const Eigen::VectorXd& p) -> std::optional<Decoded> {
    int k = 0;
    const double la = p[k++];
    if (la < log_alpha_lo || la > log_alpha_hi) return std::nullopt;
    double nu = opts.fix_nu.value_or(0.0);
    if (free_nu) {
      const double ln = p[k++];
      if (ln < log_nu_lo || ln > log_nu_hi) return std::nullopt;
      nu = std::exp(ln);
    }
    double tau = 0.0;
    if (opts.with_nugget) {
      const double lt = p[k++];
      if (lt < log_tau_lo || lt > log_tau_hi) return std::nullopt;
      tau = std::exp(lt);
    }
    return Decoded{std::exp(la), nu, tau};
  };

  Eigen::MatrixXd work(n, n);
  std::vector<double> rho;
  auto objective = [&](const Eigen::VectorXd& p) {
    const auto d = decode(p);
    if (!d) return std::numeric_limits<double>::infinity();
    return -profiled_loglik(lags, values, d->alpha, d->nu, d->tau, work, rho).loglik;
  };

  // Latin hypercube over plausible starting ranges.
  Philox4x32 rng(opts.seed, 0xF17);
  const int starts = opts.n_starts;
  std::vector<Eigen::VectorXd> init(starts, Eigen::VectorXd(dim));
  std::vector<std::pair<double, double>> ranges{{std::log(0.02 * scale), std::log(0.5 * scale)}};
  if (free_nu) ranges.emplace_back(std::log(0.3), std::log(2.5));
  if (opts.with_nugget) ranges.emplace_back(std::log(1e-3), std::log(1.0));
  for (int k = 0; k < dim; ++k) {
    std::vector<int> strata(starts);
    std::iota(strata.begin(), strata.end(), 0);
    for (int i = starts - 1; i > 0; --i) {
      std::swap(strata[i], strata[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int s = 0; s < starts; ++s) {
      const double u = (strata[s] + rng.uniform()) / starts;
      init[s][k] = ranges[k].first + u * (ranges[k].second - ranges[k].first);
    }
  }

  NelderMeadOptions nm;
  nm.max_evaluations = opts.max_evaluations;
  nm.initial_step = 0.5;
  FitResult best;
  best.loglik = kNegInf;
  bool any_converged = false;
  int total_evals = 0;
  Eigen::VectorXd best_p;
  for (const auto& start : init) {
    const NelderMeadResult r = nelder_mead(objective, start, nm);
    total_evals += r.evaluations;
    any_converged = any_converged || r.converged;
    if (std::isfinite(r.value) && -r.value > best.loglik) {
      best.loglik = -r.value;
      best_p = r.x;
      best.converged = r.converged;
    }
  }
  best.evaluations = total_evals;
  if (best_p.size() == 0) {
    throw FitError("likelihood was not finite at any explored parameter", best);
  }
  const Decoded d = *decode(best_p);
  const ProfiledLik pl = profiled_loglik(lags, values, d.alpha, d.nu, d.tau, work, rho);
  best.model = {pl.sigma2, d.alpha, d.nu, pl.sigma2 * d.tau};
  if (!any_converged) throw FitError("Nelder-Mead did not converge from any start", best);
  return best;
}

double determine_ht(std::span<const VariogramModel> models, double rel_tol) {
  if (models.empty()) throw ParameterError("determine_ht needs at least one model");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw ParameterError("rel_tol must lie in (0, 1)");
  double ht = 0.0;
  for (const auto& m : models) {
    m.validate();
    double lo = 0.0;
    double hi = m.alpha;
    while (m.correlation(hi) > rel_tol) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (m.correlation(mid) > rel_tol ? lo : hi) = mid;
    }
    ht = std::max(ht, hi);
  }
  return ht;
}

std::vector<double> uniform_grid(double upper, std::size_t m) {
  if (m < 2) throw ParameterError("grid needs at least two points");
  std::vector<double> g(m);
  for (std::size_t j = 0; j < m; ++j) g[j] = upper * static_cast<double>(j) / static_cast<double>(m - 1);
  g.back() = upper;
  return g;
}

SampledFunction sample_on_grid(const VariogramModel& model, double h_t, std::size_t m) {
  model.validate();
  if (!(h_t > 0.0)) throw ParameterError("h_t must be positive");
  SampledFunction f;
  f.grid = uniform_grid(h_t, m);
  f.values.resize(m);
  f.values[0] = model.nugget;
  for (std::size_t j = 1; j < m; ++j) f.values[j] = matern_semivariance(f.grid[j], model);
  return f;
}

}  // namespace nsdeform
