#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "unb/dataset.hpp"
#include "unb/distributions.hpp"
#include "unb/estimation.hpp"
#include "unb/optim.hpp"

namespace unb {

enum class CountModel { unb, nb, up };

std::string to_string(CountModel model);
/// Accepts "unb", "nb", "up" (case-insensitive); throws DataError otherwise.
CountModel parse_count_model(std::string_view name);

struct RegressionSpec {
  std::string response;
  std::vector<std::string> covariates;
  bool intercept = true;
};

/// Design matrix and response resolved from a Dataset.
struct RegressionData {
  Eigen::MatrixXd design;  ///< n x (s+1); first column all ones with an intercept
  std::vector<Count> y;
  std::vector<std::string> coefficient_names;
};

RegressionData build_design(const Dataset& data, const RegressionSpec& spec);

struct RegressionFit {
  CountModel model = CountModel::unb;
  std::vector<std::string> coefficient_names;
  Eigen::VectorXd beta;
  /// Dispersion; absent for the uniform-Poisson model, which has none.
  std::optional<double> r;
  /// Standard errors, Wald statistics, p-values and intervals run over beta
  /// followed by r when present. Entries are NaN when the observed
  /// information is not invertible.
  Eigen::VectorXd std_errors;
  Eigen::VectorXd wald_t;
  Eigen::VectorXd p_values;
  std::vector<Interval> conf_intervals;
  Eigen::MatrixXd covariance;
  double log_likelihood = 0.0;
  double aic = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double level = 0.95;
  std::size_t n = 0;
  std::vector<std::string> diagnostics;
};

/// Counters for the numerical guards applied while evaluating a likelihood.
struct LoglikGuards {
  std::size_t clamped_predictors = 0;   ///< |eta| > 700 clamped
  std::size_t floored_probabilities = 0;  ///< pmf < 1e-300 floored
};

inline constexpr double kMaxLinearPredictor = 700.0;
inline constexpr double kPmfFloor = 1e-300;

/// Sum of UNB log-pmfs with mu_i = exp(design_i . beta), p_i = r / (2 mu_i + r).
double unb_reg_loglik(const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                      std::span<const Count> y, LoglikGuards* guards = nullptr);

/// Analytic d/d beta of unb_reg_loglik: sum_i (x_i p_i - r q_i + q_i p_i d/dq log 2F1) y_i.
Eigen::VectorXd unb_reg_gradient(const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                                 std::span<const Count> y);

/// Same for the comparators. nb: p_i = r / (mu_i + r); up: lambda_i = 2 mu_i (r ignored).
double reg_loglik(CountModel model, const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                  std::span<const Count> y, LoglikGuards* guards = nullptr);
Eigen::VectorXd reg_gradient(CountModel model, const Eigen::VectorXd& beta, double r,
                             const Eigen::MatrixXd& design, std::span<const Count> y);

RegressionFit fit_regression(CountModel model, const RegressionData& data, double level = 0.95,
                             const OptimOptions& optim = {});

RegressionFit fit_unb_regression(const Dataset& data, const RegressionSpec& spec, double level = 0.95);
RegressionFit fit_nb_regression(const Dataset& data, const RegressionSpec& spec, double level = 0.95);
RegressionFit fit_up_regression(const Dataset& data, const RegressionSpec& spec, double level = 0.95);

/// Fitted probability of each observed count.
Eigen::VectorXd fitted_pmf(const RegressionFit& fit, const RegressionData& data);

struct VuongResult {
  double z = 0.0;
  double omega = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// z = sum ln(p1/p2) / (omega sqrt n), omega^2 the divide-by-n variance of
/// the log ratios. Throws DegenerateComparisonError when omega < 1e-12.
VuongResult vuong_test(std::span<const double> pmf1, std::span<const double> pmf2);
VuongResult vuong_test(const Eigen::VectorXd& pmf1, const Eigen::VectorXd& pmf2);

}  // namespace unb
