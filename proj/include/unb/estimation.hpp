#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unb/distributions.hpp"
#include "unb/optim.hpp"

namespace unb {

struct MomentSummary {
  std::size_t n = 0;
  double m1 = 0.0;  ///< first raw sample moment
  double m2 = 0.0;  ///< second raw sample moment
  double sample_variance = 0.0;  ///< divisor n - 1 (0 when n = 1)
  std::optional<double> dispersion_index;  ///< variance / mean, absent when mean = 0
  double zero_proportion = 0.0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

enum class FitMethod { moments, mle };

struct FitResult {
  UnbParams params;
  double log_likelihood = 0.0;
  /// Standard errors, covariance and intervals are in (r, p) order and are
  /// only present for likelihood fits with a negative definite Hessian.
  std::optional<Eigen::Vector2d> std_errors = std::nullopt;
  std::optional<Eigen::Matrix2d> cov_matrix = std::nullopt;
  std::optional<std::array<Interval, 2>> conf_intervals = std::nullopt;
  std::optional<Eigen::Matrix2d> hessian = std::nullopt;
  double aic = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double level = 0.95;
  FitMethod method = FitMethod::mle;
};

struct LrTestResult {
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
  double restricted_loglik = 0.0;
  double full_loglik = 0.0;
  double restricted_p = 0.0;  ///< geometric MLE 1 / (1 + mean)
};

enum class ScoreMode { finite_difference, theta_series };

MomentSummary sample_moments(std::span<const Count> data);

/// Method of moments: r = 4 m1^2 / (3 (m2 - m1) - 4 m1^2), p = r / (2 m1 + r).
/// Throws EstimationError when m1 = 0 or the denominator is not positive.
UnbParams mm_estimate(double m1, double m2);
FitResult fit_mm(std::span<const Count> data);

double unb_loglik(const UnbParams& params, std::span<const Count> data,
                  const SeriesControl& ctrl = {});

/// d logL / dp, evaluated through the 2F1 contiguous ratio.
double unb_score_p(const UnbParams& params, std::span<const Count> data,
                   const SeriesControl& ctrl = {});

/// d logL / dr, either as a five-point central difference of the
/// log-likelihood or through the double-series b-derivative of 2F1.
double unb_score_r(const UnbParams& params, std::span<const Count> data,
                   ScoreMode mode = ScoreMode::finite_difference, const SeriesControl& ctrl = {});

/// Maximum likelihood over (ln r, logit p). Standard errors come from the
/// inverse of the numerical Hessian in (r, p) at the optimum.
FitResult fit_mle(std::span<const Count> data, std::optional<UnbParams> init = std::nullopt,
                  double level = 0.95, const OptimOptions& optim = {});

/// Deviance 2 (l_unb - l_geometric) against the r = 2 submodel, with an
/// upper-tail chi-square(1) p-value.
LrTestResult lr_test_geometric(std::span<const Count> data);

/// Model-agnostic fit summary used for the comparator laws.
struct DistributionFit {
  std::string model;
  std::vector<std::string> parameter_names;
  Eigen::VectorXd estimates;
  std::optional<Eigen::VectorXd> std_errors;
  std::vector<Interval> conf_intervals;
  double log_likelihood = 0.0;
  double aic = 0.0;
  bool converged = false;
  int iterations = 0;
  double level = 0.95;
};

DistributionFit summarize_fit(const FitResult& fit);
DistributionFit fit_nb_mle(std::span<const Count> data, double level = 0.95, const OptimOptions& optim = {});
DistributionFit fit_up_mle(std::span<const Count> data, double level = 0.95, const OptimOptions& optim = {});
DistributionFit fit_geometric_mle(std::span<const Count> data, double level = 0.95);

}  // namespace unb
