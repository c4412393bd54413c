#pragma once

#include <functional>

#include <Eigen/Core>

namespace unb {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct OptimOptions {
  double gradient_tol = 1e-6;
  int max_iterations = 1000;
  /// Line-search failures tolerated before switching to the simplex search.
  int max_line_search_failures = 2;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  bool used_simplex = false;
};

/// Quasi-Newton (BFGS) ascent with backtracking line search. Falls back to a
/// Nelder-Mead search, followed by one more quasi-Newton pass, once the line
/// search has failed `max_line_search_failures` times.
OptimResult maximize(const Objective& f, const GradientFn& grad, const Eigen::VectorXd& x0,
                     const OptimOptions& options = {});

/// Derivative-free Nelder-Mead ascent.
OptimResult maximize_simplex(const Objective& f, const Eigen::VectorXd& x0, double initial_step,
                             int max_iterations);

/// Central-difference Hessian with per-coordinate steps.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& steps);

/// Five-point central difference f'(x) with step h.
double central_difference(const std::function<double(double)>& f, double x, double h);

}  // namespace unb
