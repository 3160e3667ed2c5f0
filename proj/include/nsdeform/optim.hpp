#pragma once

#include <Eigen/Core>
#include <functional>

namespace nsdeform {

struct NelderMeadOptions {
  double initial_step = 0.5;
  double x_tol = 1e-6;
  double f_tol = 1e-9;
  int max_evaluations = 2000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f by the Nelder-Mead simplex method. Non-finite values are
/// treated as +infinity, so infeasible points are simply rejected.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts = {});

}  // namespace nsdeform
