#include "unb/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "unb/errors.hpp"

namespace unb {

namespace {

struct BfgsOutcome {
  OptimResult result;
  bool needs_fallback = false;
};

BfgsOutcome run_bfgs(const Objective& f, const GradientFn& grad, const Eigen::VectorXd& x0,
                     const OptimOptions& options) {
  const Eigen::Index dim = x0.size();
  BfgsOutcome out;
  OptimResult& res = out.result;
  res.x = x0;
  res.value = f(x0);
  if (!std::isfinite(res.value)) throw EstimationError("optimizer: objective is not finite at the start point");
  res.gradient = grad(x0);

  // Inverse Hessian of the negated objective.
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);
  bool fresh = true;
  int failures = 0;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    const double gnorm = res.gradient.norm();
    if (gnorm < options.gradient_tol) {
      res.converged = true;
      return out;
    }

    Eigen::VectorXd dir = h * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope > 0.0)) {
      h.setIdentity();
      fresh = true;
      dir = res.gradient;
      slope = gnorm * gnorm;
    }
    if (fresh && dir.norm() > 1.0) {
      slope /= dir.norm();
      dir.normalize();
    }

    // Backtracking with an Armijo test. Close to the optimum the improvement
    // can drop below rounding noise; a step is then still taken if it does
    // not lose more than noise and shrinks the gradient.
    const double noise = 1e-12 * std::max(1.0, std::abs(res.value));
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new;
    double f_new = 0.0;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      x_new = res.x + alpha * dir;
      f_new = f(x_new);
      if (!std::isfinite(f_new)) continue;
      if (f_new >= res.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      if (f_new >= res.value - noise) {
        g_new = grad(x_new);
        if (g_new.allFinite() && g_new.norm() < gnorm) {
          accepted = true;
          break;
        }
        g_new.resize(0);
      }
    }
    if (!accepted) {
      if (++failures >= options.max_line_search_failures) {
        out.needs_fallback = true;
        return out;
      }
      h.setIdentity();
      fresh = true;
      continue;
    }
    if (g_new.size() == 0) g_new = grad(x_new);

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = res.gradient - g_new;  // change in the negated gradient
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
          rho * s * s.transpose();
      fresh = false;
    }
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
  }
  res.converged = res.gradient.norm() < options.gradient_tol;
  return out;
}

}  // namespace

OptimResult maximize(const Objective& f, const GradientFn& grad, const Eigen::VectorXd& x0,
                     const OptimOptions& options) {
  auto first = run_bfgs(f, grad, x0, options);
  if (!first.needs_fallback) return first.result;

  auto simplex = maximize_simplex(f, first.result.x, 0.1, 2000 * static_cast<int>(x0.size()));
  OptimOptions polish = options;
  polish.max_line_search_failures = std::numeric_limits<int>::max() / 2;
  polish.max_iterations = std::max(50, options.max_iterations / 2);
  auto second = run_bfgs(f, grad, simplex.x, polish);
  OptimResult res = second.result;
  res.iterations += first.result.iterations + simplex.iterations;
  res.used_simplex = true;
  if (!second.needs_fallback) return res;
  res.gradient = grad(res.x);
  res.converged = res.gradient.norm() < options.gradient_tol;
  return res;
}

OptimResult maximize_simplex(const Objective& f, const Eigen::VectorXd& x0, double initial_step,
                             int max_iterations) {
  const Eigen::Index dim = x0.size();
  const auto n = static_cast<std::size_t>(dim);
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  // Work with the negated objective; non-finite values become +inf.
  auto cost = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][static_cast<Eigen::Index>(i)] += initial_step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = cost(pts[i]);

  std::vector<std::size_t> order(n + 1);
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    double spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      spread = std::max(spread, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    }
    if (std::abs(vals[worst] - vals[best]) <= 1e-13 * (std::abs(vals[best]) + 1e-13) && spread < 1e-9) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
    const double f_reflected = cost(reflected);
    if (f_reflected < vals[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double f_expanded = cost(expanded);
      if (f_expanded < f_reflected) {
        pts[worst] = expanded;
        vals[worst] = f_expanded;
      } else {
        pts[worst] = reflected;
        vals[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < vals[second_worst]) {
      pts[worst] = reflected;
      vals[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < vals[worst];
    const Eigen::VectorXd contracted = outside ? centroid + 0.5 * (reflected - centroid)
                                               : centroid + 0.5 * (pts[worst] - centroid);
    const double f_contracted = cost(contracted);
    if (f_contracted < std::min(f_reflected, vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = f_contracted;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = cost(pts[i]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  OptimResult res;
  res.x = pts[best];
  res.value = -vals[best];
  res.iterations = iter;
  res.used_simplex = true;
  return res;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& steps) {
  const Eigen::Index dim = x.size();
  Eigen::MatrixXd hess(dim, dim);
  const double f0 = f(x);
  auto shifted = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    Eigen::VectorXd y = x;
    y[i] += di;
    y[j] += dj;
    return f(y);
  };
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double hi = steps[i];
    hess(i, i) = (shifted(i, hi, i, 0.0) - 2.0 * f0 + shifted(i, -hi, i, 0.0)) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = steps[j];
      const double v = (shifted(i, hi, j, hj) - shifted(i, hi, j, -hj) - shifted(i, -hi, j, hj) +
                        shifted(i, -hi, j, -hj)) /
                       (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
}

}  // namespace unb
