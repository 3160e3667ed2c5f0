#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nsdeform/variogram.hpp"

namespace nsdeform {

struct Standardized {
  SampledFunction function;
  double scale = 1.0;  // c: partial sill of the continuous part
  double shift = 0.0;  // e: value at 0+, the nugget
};

/// Maps f affinely onto [0, 1]: (f - f(0+)) / (f(h_t) - f(0+)).
Standardized standardize(const SampledFunction& f);

/// Square-root velocity function of a curve sampled on a uniform grid
/// (central differences, second-order one-sided at the ends),
/// with the domain rescaled to [0, 1].
struct SrvfCurve {
  std::vector<double> grid;
  std::vector<double> q;

  std::size_t size() const { return q.size(); }
};

SrvfCurve to_srvf(const SampledFunction& f);
SrvfCurve to_srvf(std::span<const double> values);

/// Admissible DP steps (di, dj): coprime pairs with 1 <= di, dj <= max_step.
/// The first entry is always (1, 1).
std::vector<std::pair<int, int>> dp_neighbors(int max_step);

struct DpOptions {
  /// Lattice steps are coprime pairs up to this size; slopes lie in
  /// [1/max_step, max_step].
  int max_step = 12;
};

struct DpResult {
  std::vector<double> warp;  // gamma at the grid points, gamma(0)=0, gamma(1)=1
  double cost = 0.0;
};

/// Dynamic-programming alignment: returns the lattice warp gamma minimizing
/// || q_target - (q_moving o gamma) sqrt(gamma') ||^2, i.e. the moving curve
/// composed with gamma matches the target.
DpResult dp_align(const SrvfCurve& q_target, const SrvfCurve& q_moving, const DpOptions& opts = {});

/// Monotone boundary-preserving distance warp on [0, h_t], identity beyond.
class WarpingFunction {
public:
  WarpingFunction() = default;
  /// knots must start at 0 and end at h_t; warped must be nondecreasing from
  /// 0 to h_t. bandwidth is 0 for an unsmoothed warp.
  WarpingFunction(std::vector<double> knots, std::vector<double> warped, double bandwidth = 0.0);

  static WarpingFunction identity(double h_t, std::size_t m = 2);

  double operator()(double h) const;

  double horizon() const { return knots_.back(); }
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& warped() const { return warped_; }

private:
  std::vector<double> knots_{0.0, 1.0};
  std::vector<double> warped_{0.0, 1.0};
  double bandwidth_ = 0.0;
};

struct RegistrationOptions {
  DpOptions dp;
  int max_iterations = 20;
  double tolerance = 1e-6;
};

struct RegistrationResult {
  SampledFunction template_function;   // mean of the aligned standardized curves
  std::vector<WarpingFunction> warps;  // distance warps phi_i on [0, h_t]
  std::vector<SampledFunction> aligned;
  std::vector<double> scalings;
  std::vector<double> translations;
  int iterations = 0;
  bool converged = false;
};

/// Multiple alignment of k curves on a common grid of [0, h_t] against an
/// iteratively re-estimated SRVF template. Inputs are standardized first.
/// warps[i] satisfies f_i ~ c_i (g o phi_i) + e_i with the mean of the DP
/// warps centred at the identity.
RegistrationResult register_set(std::span<const SampledFunction> functions,
                                 const RegistrationOptions& opts = {});

/// Gaussian-kernel Nadaraya-Watson smoothing of the deviation phi(h) - h,
/// re-pinned at both ends and projected onto nondecreasing sequences.
/// Throws ParameterError when bandwidth <= 0.
WarpingFunction smooth_and_extend(std::span<const double> distances, std::span<const double> warped,
                                  double h_t, double bandwidth);

/// Pool-adjacent-violators projection onto nondecreasing sequences.
std::vector<double> isotonic_fit(std::span<const double> y);

/// Linear interpolation of (xs, ys) at x, with xs increasing. Clamps outside.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

}  // namespace nsdeform
