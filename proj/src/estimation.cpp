#include "unb/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Cholesky>

#include "unb/optim.hpp"
#include "unb/stats.hpp"

namespace unb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Distinct values with multiplicities; every likelihood in this file is a
/// weighted sum over the table rather than over raw observations.
struct CountTable {
  std::vector<Count> values;
  std::vector<double> weights;
  double n = 0.0;
  double total = 0.0;  // sum of observations
};

CountTable tabulate(std::span<const Count> data) {
  if (data.empty()) throw DataError("empty data");
  std::map<Count, double> freq;
  for (Count x : data) {
    if (x < 0) throw DataError("counts must be non-negative");
    freq[x] += 1.0;
  }
  CountTable t;
  for (const auto& [value, weight] : freq) {
    t.values.push_back(value);
    t.weights.push_back(weight);
    t.n += weight;
    t.total += weight * static_cast<double>(value);
  }
  return t;
}

double loglik(const CountTable& t, double r, double p, const SeriesControl& ctrl = {}) {
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  double sum = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    sum += t.weights[i] * detail::unb_log_pmf(r, log_p, log_q, t.values[i], ctrl);
  }
  return sum;
}

double score_p(const CountTable& t, double r, double p, const SeriesControl& ctrl = {}) {
  const double q = 1.0 - p;
  double hyp = 0.0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    hyp += t.weights[i] * detail::unb_log_hyp_dz(r, q, t.values[i], ctrl);
  }
  return -t.total / q + t.n * r / p - hyp;
}

double fd_step_r(double r) { return 1e-3 * std::min(1.0, r); }

double score_r_fd(const CountTable& t, double r, double p, const SeriesControl& ctrl = {}) {
  return central_difference([&](double rr) { return loglik(t, rr, p, ctrl); }, r, fd_step_r(r));
}

double score_r_theta(const CountTable& t, double r, double p, const SeriesControl& ctrl) {
  const double q = 1.0 - p;
  double sum = t.n * (std::log(p) - digamma(r));
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const double x = static_cast<double>(t.values[i]);
    double term = digamma(r + x);
    if (q > 0.0) {
      // d/db 2F1(1, b; 2+x; q) / 2F1 at b = r + x.
      const ThetaArgs<double> args{1.0, 1.0, r + x, r + x + 1.0, 2.0, r + x + 1.0, 2.0, x + 3.0, q, q};
      const auto theta = kampe_theta1_log(args, ctrl);
      const auto hyp = gauss_2f1_log(1.0, r + x, 2.0 + x, q, ctrl);
      term += theta.sign * std::exp(std::log(q / (2.0 + x)) + theta.log_abs - hyp.log_abs);
    }
    sum += t.weights[i] * term;
  }
  return sum;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double z_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  return normal_quantile(1.0 - (1.0 - level) / 2.0);
}

/// Observed-information inference at an optimum given in natural coordinates.
struct Inference {
  Eigen::MatrixXd hessian;
  std::optional<Eigen::MatrixXd> cov;
};

Inference observed_information(const Objective& f, const Eigen::VectorXd& at,
                               const Eigen::VectorXd& steps) {
  Inference out;
  out.hessian = numerical_hessian(f, at, steps);
  const Eigen::MatrixXd info = -out.hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) {
    out.cov = llt.solve(Eigen::MatrixXd::Identity(at.size(), at.size()));
  }
  return out;
}

// Step in p that never leaves (0, 1).
double fd_step_p(double p) { return std::min(1e-4, 0.5 * std::min(p, 1.0 - p)); }

DistributionFit finish(std::string model, std::vector<std::string> names,
                       const Eigen::VectorXd& estimates, const Objective& ll,
                       const Eigen::VectorXd& steps, bool converged, int iterations, double level) {
  DistributionFit fit;
  fit.model = std::move(model);
  fit.parameter_names = std::move(names);
  fit.estimates = estimates;
  fit.log_likelihood = ll(estimates);
  fit.aic = -2.0 * fit.log_likelihood + 2.0 * static_cast<double>(estimates.size());
  fit.converged = converged;
  fit.iterations = iterations;
  fit.level = level;
  const auto inf = observed_information(ll, estimates, steps);
  if (inf.cov) {
    const double z = z_quantile(level);
    fit.std_errors = inf.cov->diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < estimates.size(); ++i) {
      const double half = z * (*fit.std_errors)[i];
      fit.conf_intervals.push_back({estimates[i] - half, estimates[i] + half});
    }
  }
  return fit;
}

}  // namespace

MomentSummary sample_moments(std::span<const Count> data) {
  if (data.empty()) throw DataError("sample_moments: empty data");
  MomentSummary s;
  s.n = data.size();
  const double n = static_cast<double>(s.n);
  double sum = 0.0, sum2 = 0.0, zeros = 0.0;
  for (Count x : data) {
    if (x < 0) throw DataError("sample_moments: counts must be non-negative");
    const double xd = static_cast<double>(x);
    sum += xd;
    sum2 += xd * xd;
    zeros += x == 0 ? 1.0 : 0.0;
  }
  s.m1 = sum / n;
  s.m2 = sum2 / n;
  s.sample_variance = s.n > 1 ? std::max(0.0, (sum2 - n * s.m1 * s.m1) / (n - 1.0)) : 0.0;
  if (s.m1 > 0.0) s.dispersion_index = s.sample_variance / s.m1;
  s.zero_proportion = zeros / n;
  return s;
}

UnbParams mm_estimate(double m1, double m2) {
  if (!(m1 > 0.0)) throw EstimationError("fit_mm: sample mean is zero; moments are degenerate");
  const double denom = 3.0 * (m2 - m1) - 4.0 * m1 * m1;
  if (!(denom > 0.0)) {
    throw EstimationError("fit_mm: sample is not dispersed enough for the moment equations");
  }
  const double r = 4.0 * m1 * m1 / denom;
  return UnbParams(r, r / (2.0 * m1 + r));
}

FitResult fit_mm(std::span<const Count> data) {
  const auto m = sample_moments(data);
  FitResult fit{.params = mm_estimate(m.m1, m.m2)};
  fit.method = FitMethod::moments;
  fit.converged = true;
  fit.log_likelihood = unb_loglik(fit.params, data);
  fit.aic = -2.0 * fit.log_likelihood + 4.0;
  return fit;
}

double unb_loglik(const UnbParams& params, std::span<const Count> data, const SeriesControl& ctrl) {
  return loglik(tabulate(data), params.r(), params.p(), ctrl);
}

double unb_score_p(const UnbParams& params, std::span<const Count> data, const SeriesControl& ctrl) {
  return score_p(tabulate(data), params.r(), params.p(), ctrl);
}

double unb_score_r(const UnbParams& params, std::span<const Count> data, ScoreMode mode,
                   const SeriesControl& ctrl) {
  const auto t = tabulate(data);
  if (mode == ScoreMode::theta_series) return score_r_theta(t, params.r(), params.p(), ctrl);
  return score_r_fd(t, params.r(), params.p(), ctrl);
}

FitResult fit_mle(std::span<const Count> data, std::optional<UnbParams> init, double level,
                  const OptimOptions& optim) {
  const auto t = tabulate(data);
  if (t.total == 0.0) {
    throw EstimationError("fit_mle: all observations are zero; the likelihood has no interior maximum");
  }
  const double z = z_quantile(level);

  if (!init) {
    try {
      init = fit_mm(data).params;
    } catch (const EstimationError&) {
      init = UnbParams(2.0, 1.0 / (1.0 + t.total / t.n));
    }
  }

  // theta = (ln r, logit p)
  auto natural = [](const Eigen::VectorXd& th) {
    return std::pair{std::exp(th[0]), logistic(th[1])};
  };
  Objective objective = [&](const Eigen::VectorXd& th) {
    const auto [r, p] = natural(th);
    if (!(r > 0.0 && std::isfinite(r) && p > 0.0 && p < 1.0)) return kNegInf;
    try {
      return loglik(t, r, p);
    } catch (const Error&) {
      return kNegInf;
    }
  };
  GradientFn gradient = [&](const Eigen::VectorXd& th) {
    const auto [r, p] = natural(th);
    Eigen::VectorXd g(2);
    try {
      g[0] = score_r_fd(t, r, p) * r;
      g[1] = score_p(t, r, p) * p * (1.0 - p);
    } catch (const Error&) {
      g.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return g;
  };

  Eigen::VectorXd x0(2);
  x0 << std::log(init->r()), std::log(init->p() / init->q());
  const auto opt = maximize(objective, gradient, x0, optim);
  const auto [r_hat, p_hat] = natural(opt.x);

  FitResult fit{.params = UnbParams(r_hat, p_hat)};
  fit.method = FitMethod::mle;
  fit.log_likelihood = opt.value;
  fit.aic = -2.0 * opt.value + 4.0;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.gradient_norm = opt.gradient.norm();
  fit.level = level;

  Objective natural_ll = [&](const Eigen::VectorXd& v) {
    if (!(v[0] > 0.0 && v[1] > 0.0 && v[1] < 1.0)) return kNegInf;
    return loglik(t, v[0], v[1]);
  };
  Eigen::VectorXd at(2), steps(2);
  at << r_hat, p_hat;
  steps << std::min(1e-4 * std::max(1.0, r_hat), 0.5 * r_hat), fd_step_p(p_hat);
  const auto inf = observed_information(natural_ll, at, steps);
  fit.hessian = inf.hessian;
  if (inf.cov) {
    fit.cov_matrix = *inf.cov;
    fit.std_errors = inf.cov->diagonal().cwiseSqrt();
    const Eigen::Vector2d& se = *fit.std_errors;
    fit.conf_intervals = std::array<Interval, 2>{
        Interval{r_hat - z * se[0], r_hat + z * se[0]},
        Interval{p_hat - z * se[1], p_hat + z * se[1]}};
  }
  return fit;
}

LrTestResult lr_test_geometric(std::span<const Count> data) {
  const auto t = tabulate(data);
  LrTestResult out;
  out.restricted_p = 1.0 / (1.0 + t.total / t.n);
  // UNB(2, p) is geometric(p), so the restricted fit is closed form.
  out.restricted_loglik = t.n * std::log(out.restricted_p) + t.total * std::log1p(-out.restricted_p);

  auto full = fit_mle(data);
  if (full.log_likelihood < out.restricted_loglik) {
    const auto retry = fit_mle(data, UnbParams(2.0, out.restricted_p));
    if (retry.log_likelihood > full.log_likelihood) full = retry;
  }
  out.full_loglik = full.log_likelihood;
  out.statistic = 2.0 * (out.full_loglik - out.restricted_loglik);
  out.p_value = chi_squared_sf(std::max(0.0, out.statistic), 1.0);
  return out;
}

DistributionFit summarize_fit(const FitResult& fit) {
  DistributionFit out;
  out.model = "unb";
  out.parameter_names = {"r", "p"};
  out.estimates = Eigen::Vector2d(fit.params.r(), fit.params.p());
  if (fit.std_errors) out.std_errors = Eigen::VectorXd(*fit.std_errors);
  if (fit.conf_intervals) out.conf_intervals.assign(fit.conf_intervals->begin(), fit.conf_intervals->end());
  out.log_likelihood = fit.log_likelihood;
  out.aic = fit.aic;
  out.converged = fit.converged;
  out.iterations = fit.iterations;
  out.level = fit.level;
  return out;
}

DistributionFit fit_nb_mle(std::span<const Count> data, double level, const OptimOptions& optim) {
  const auto t = tabulate(data);
  if (t.total == 0.0) throw EstimationError("fit_nb_mle: all observations are zero");
  const double mean = t.total / t.n;

  auto nb_ll = [&](double r, double p) {
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    double sum = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      sum += t.weights[i] * detail::nb_log_pmf(r, log_p, log_q, t.values[i]);
    }
    return sum;
  };
  Objective objective = [&](const Eigen::VectorXd& th) {
    const double r = std::exp(th[0]);
    const double p = logistic(th[1]);
    if (!(r > 0.0 && std::isfinite(r) && p > 0.0 && p < 1.0)) return kNegInf;
    return nb_ll(r, p);
  };
  GradientFn gradient = [&](const Eigen::VectorXd& th) {
    const double r = std::exp(th[0]);
    const double p = logistic(th[1]);
    double dr = t.n * (std::log(p) - digamma(r));
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      dr += t.weights[i] * digamma(r + static_cast<double>(t.values[i]));
    }
    const double dp = t.n * r / p - t.total / (1.0 - p);
    return Eigen::Vector2d(dr * r, dp * p * (1.0 - p)).eval();
  };
  // Start from a unit shape with the mean matched.
  Eigen::VectorXd x0(2);
  x0 << 0.0, std::log(1.0 / mean);
  const auto opt = maximize(objective, gradient, x0, optim);
  const double r_hat = std::exp(opt.x[0]);
  const double p_hat = logistic(opt.x[1]);

  Objective natural_ll = [&](const Eigen::VectorXd& v) {
    if (!(v[0] > 0.0 && v[1] > 0.0 && v[1] < 1.0)) return kNegInf;
    return nb_ll(v[0], v[1]);
  };
  Eigen::VectorXd est(2), steps(2);
  est << r_hat, p_hat;
  steps << std::min(1e-4 * std::max(1.0, r_hat), 0.5 * r_hat), fd_step_p(p_hat);
  return finish("nb", {"r", "p"}, est, natural_ll, steps, opt.converged, opt.iterations, level);
}

DistributionFit fit_up_mle(std::span<const Count> data, double level, const OptimOptions& optim) {
  const auto t = tabulate(data);
  if (t.total == 0.0) throw EstimationError("fit_up_mle: all observations are zero");

  auto up_ll = [&](double lambda) {
    const UpParams params(lambda);
    double sum = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      sum += t.weights[i] * up_log_pmf(params, t.values[i]);
    }
    return sum;
  };
  Objective objective = [&](const Eigen::VectorXd& th) {
    const double lambda = std::exp(th[0]);
    if (!(lambda > 0.0 && std::isfinite(lambda))) return kNegInf;
    try {
      return up_ll(lambda);
    } catch (const Error&) {
      return kNegInf;
    }
  };
  GradientFn gradient = [&](const Eigen::VectorXd& th) {
    const double lambda = std::exp(th[0]);
    double d = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double x = static_cast<double>(t.values[i]);
      const double ratio = std::exp(confluent_1f1_log(2.0, x + 3.0, lambda).log_abs -
                                    confluent_1f1_log(1.0, x + 2.0, lambda).log_abs);
      d += t.weights[i] * (x / lambda - 1.0 + ratio / (x + 2.0));
    }
    return Eigen::VectorXd::Constant(1, d * lambda).eval();
  };
  // The uniform mixture halves the latent mean.
  Eigen::VectorXd x0(1);
  x0 << std::log(2.0 * t.total / t.n);
  const auto opt = maximize(objective, gradient, x0, optim);
  const double lambda = std::exp(opt.x[0]);

  Objective natural_ll = [&](const Eigen::VectorXd& v) {
    return v[0] > 0.0 ? up_ll(v[0]) : kNegInf;
  };
  Eigen::VectorXd est(1), steps(1);
  est << lambda;
  steps << std::min(1e-4 * std::max(1.0, lambda), 0.5 * lambda);
  return finish("up", {"lambda"}, est, natural_ll, steps, opt.converged, opt.iterations, level);
}

DistributionFit fit_geometric_mle(std::span<const Count> data, double level) {
  const auto t = tabulate(data);
  const double p_hat = 1.0 / (1.0 + t.total / t.n);
  if (!(p_hat < 1.0)) throw EstimationError("fit_geometric_mle: all observations are zero");
  Objective natural_ll = [&](const Eigen::VectorXd& v) {
    if (!(v[0] > 0.0 && v[0] < 1.0)) return kNegInf;
    return t.n * std::log(v[0]) + t.total * std::log1p(-v[0]);
  };
  Eigen::VectorXd est(1), steps(1);
  est << p_hat;
  steps << fd_step_p(p_hat);
  return finish("geometric", {"p"}, est, natural_ll, steps, true, 0, level);
}

}  // namespace unb
