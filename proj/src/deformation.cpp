#include "nsdeform/deformation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "nsdeform/errors.hpp"

namespace nsdeform {

double global_distance(const Location& a, const Location& b, const Partition& part,
                       std::span<const WarpingFunction> warps) {
  if (warps.size() != part.size()) throw ParameterError("need one warp per partition region");
  if (a == b) return 0.0;
  const double h = (a - b).norm();
  double out = 0.0;
  for (const auto& w : weights(a, b, part)) out += w.weight * warps[w.region](h);
  return out;
}

WarpedDistanceMatrix warped_distance_matrix(const SiteMatrix& sites, const Partition& part,
                                            std::span<const WarpingFunction> warps) {
  const Eigen::Index n = sites.rows();
  if (n < 2) throw ParameterError("distance matrix needs at least two sites");
  WarpedDistanceMatrix out{sites, Eigen::MatrixXd::Zero(n, n), false};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Location a = sites.row(i).transpose();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Location b = sites.row(j).transpose();
      if (a == b) out.has_duplicates = true;
      out.values(i, j) = out.values(j, i) = global_distance(a, b, part, warps);
    }
  }
  return out;
}

Cmds::Cmds(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (n < 1 || distances.cols() != n) throw ParameterError("distance matrix must be square");
  // B = -1/2 J D^2 J, formed by double centring the squared distances.
  Eigen::MatrixXd b = distances.array().square().matrix();
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const Eigen::RowVectorXd col_mean = b.colwise().mean();
  const double grand = row_mean.mean();
  b.colwise() -= row_mean;
  b.rowwise() -= col_mean;
  b.array() += grand;
  b *= -0.5;
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw NumericalError("CMDS eigendecomposition failed");
  eigenvalues_ = solver.eigenvalues().reverse();
  eigenvectors_ = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < eigenvectors_.cols(); ++c) {
    Eigen::Index arg;
    eigenvectors_.col(c).cwiseAbs().maxCoeff(&arg);
    if (eigenvectors_(arg, c) < 0.0) eigenvectors_.col(c) *= -1.0;
  }
}

Eigen::Index Cmds::positive_count() const {
  const double tol = 1e-12 * std::max(1.0, std::abs(eigenvalues_[0]));
  return (eigenvalues_.array() > tol).count();
}

DeformedEmbedding Cmds::embed(int d) const {
  if (d < 1) throw ParameterError("embedding dimension must be >= 1");
  const Eigen::Index n = eigenvectors_.rows();
  DeformedEmbedding out;
  out.coords = Eigen::MatrixXd::Zero(n, d);
  out.eigenvalues = eigenvalues_;
  out.psi = std::max(0, d - 2);
  const Eigen::Index usable = std::min<Eigen::Index>(d, positive_count());
  for (Eigen::Index c = 0; c < usable; ++c) {
    out.coords.col(c) = eigenvectors_.col(c) * std::sqrt(eigenvalues_[c]);
  }
  out.zero_filled = d - static_cast<int>(usable);
  return out;
}

DeformedEmbedding cmds(const WarpedDistanceMatrix& dist, int d) {
  const Cmds solver(dist.values);
  DeformedEmbedding emb = solver.embed(d);
  emb.nmse = embedding_nmse(dist.values, emb.coords);
  return emb;
}

namespace {

// Running NMSE accumulator: squared embedded distances grow one column at a time.
class NmseTracker {
public:
  explicit NmseTracker(const Eigen::MatrixXd& delta) : delta_(delta) {
    const Eigen::Index n = delta.rows();
    if (n < 2) throw ParameterError("NMSE needs at least two sites");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) sum += delta(i, j);
    }
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double mean = sum / pairs;
    denom_ = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) denom_ += (delta(i, j) - mean) * (delta(i, j) - mean);
    }
    if (!(denom_ > 0.0)) throw NumericalError("NMSE undefined for a constant distance matrix");
    sq_ = Eigen::MatrixXd::Zero(n, n);
  }

  void add_column(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double d = x[i] - x[j];
        sq_(i, j) += d * d;
      }
    }
  }

  double value() const {
    const Eigen::Index n = delta_.rows();
    double num = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double r = std::sqrt(sq_(i, j)) - delta_(i, j);
        num += r * r;
      }
    }
    return 1.0 - num / denom_;
  }

private:
  const Eigen::MatrixXd& delta_;
  Eigen::MatrixXd sq_;
  double denom_ = 0.0;
};

}  // namespace

double embedding_nmse(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& coords) {
  if (coords.rows() != delta.rows()) throw ParameterError("embedding and distance matrix sizes differ");
  NmseTracker t(delta);
  for (Eigen::Index c = 0; c < coords.cols(); ++c) t.add_column(coords.col(c));
  return t.value();
}

double embedding_nmse(const WarpedDistanceMatrix& dist, const DeformedEmbedding& emb) {
  return embedding_nmse(dist.values, emb.coords);
}

DimensionSelection select_dimension(const Cmds& solver, const Eigen::MatrixXd& delta, int psi_max,
                                    double epsilon) {
  if (psi_max < 0) throw ParameterError("psi_max must be >= 0");
  const DeformedEmbedding full = solver.embed(2 + psi_max);
  NmseTracker t(delta);
  DimensionSelection out;
  t.add_column(full.coords.col(0));
  for (int d = 2; d <= 2 + psi_max; ++d) {
    t.add_column(full.coords.col(d - 1));
    out.nmse.push_back(t.value());
  }
  const double best = *std::max_element(out.nmse.begin(), out.nmse.end());
  for (int psi = 0; psi <= psi_max; ++psi) {
    if (out.nmse[psi] >= best - epsilon) {
      out.psi = psi;
      break;
    }
  }
  return out;
}

DimensionSelection select_dimension(const WarpedDistanceMatrix& dist, int psi_max, double epsilon) {
  return select_dimension(Cmds(dist.values), dist.values, psi_max, epsilon);
}

DeformedEmbedding embed_without_folding(const WarpedDistanceMatrix& dist, int psi, double tol, int psi_limit) {
  return embed_without_folding(Cmds(dist.values), dist, psi, tol, psi_limit);
}

DeformedEmbedding embed_without_folding(const Cmds& solver, const WarpedDistanceMatrix& dist, int psi, double tol,
                                        int psi_limit) {
  if (psi < 0) throw ParameterError("psi must be >= 0");
  const Eigen::Index n = dist.sites.rows();
  for (;; ++psi) {
    DeformedEmbedding emb = solver.embed(2 + psi);
    bool folded = false;
    for (Eigen::Index i = 0; i < n && !folded; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (dist.sites.row(i) == dist.sites.row(j)) continue;
        if ((emb.coords.row(i) - emb.coords.row(j)).norm() < tol) {
          folded = true;
          break;
        }
      }
    }
    if (!folded || psi >= psi_limit || emb.zero_filled > 0) {
      emb.nmse = embedding_nmse(dist.values, emb.coords);
      return emb;
    }
  }
}

}  // namespace nsdeform
