#include "unb/regression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "unb/errors.hpp"
#include "unb/optim.hpp"
#include "unb/specfun.hpp"
#include "unb/stats.hpp"

namespace unb {

std::string to_string(CountModel model) {
  switch (model) {
    case CountModel::unb: return "unb";
    case CountModel::nb: return "nb";
    case CountModel::up: return "up";
  }
  return "unknown";
}

CountModel parse_count_model(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "unb") return CountModel::unb;
  if (lower == "nb") return CountModel::nb;
  if (lower == "up") return CountModel::up;
  throw DataError("unknown regression model '" + std::string(name) + "' (expected unb, nb or up)");
}

RegressionData build_design(const Dataset& data, const RegressionSpec& spec) {
  std::set<std::string> seen;
  for (const auto& c : spec.covariates) {
    if (c == spec.response) throw DataError("covariate '" + c + "' is the response column");
    if (!seen.insert(c).second) throw DataError("covariate '" + c + "' is listed twice");
  }
  const auto cols = static_cast<Eigen::Index>(spec.covariates.size() + (spec.intercept ? 1 : 0));
  if (cols == 0) throw DataError("regression needs an intercept or at least one covariate");

  RegressionData out;
  out.y = data.counts(spec.response);
  const auto n = static_cast<Eigen::Index>(data.n());
  out.design.resize(n, cols);
  Eigen::Index j = 0;
  if (spec.intercept) {
    out.design.col(j++).setOnes();
    out.coefficient_names.push_back("(Intercept)");
  }
  for (const auto& c : spec.covariates) {
    out.design.col(j++) = data.column(c);
    out.coefficient_names.push_back(c);
  }
  return out;
}

namespace {

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct LinkValues {
  double log_p = 0.0;
  double log_q = 0.0;
};

// p = r / (k mu + r) with k mu = exp(log_k + eta), kept in log space.
LinkValues mixing_link(double eta, double r, double log_k) {
  const double log_kmu = log_k + eta;
  const double log_r = std::log(r);
  const double log_den = log_add_exp(log_kmu, log_r);
  return {log_r - log_den, log_kmu - log_den};
}

constexpr double kLog2 = 0.69314718055994530942;

double obs_log_pmf(CountModel model, double eta, double r, Count x) {
  switch (model) {
    case CountModel::unb: {
      const auto l = mixing_link(eta, r, kLog2);
      return detail::unb_log_pmf(r, l.log_p, l.log_q, x, SeriesControl{});
    }
    case CountModel::nb: {
      const auto l = mixing_link(eta, r, 0.0);
      return detail::nb_log_pmf(r, l.log_p, l.log_q, x);
    }
    case CountModel::up:
      return up_log_pmf(UpParams(2.0 * std::exp(eta)), x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double obs_dlog_deta(CountModel model, double eta, double r, Count x) {
  const double xd = static_cast<double>(x);
  switch (model) {
    case CountModel::unb: {
      const auto l = mixing_link(eta, r, kLog2);
      const double p = std::exp(l.log_p);
      const double q = std::exp(l.log_q);
      return xd * p - r * q + detail::unb_log_hyp_dz(r, q, x, SeriesControl{}) * q * p;
    }
    case CountModel::nb: {
      const auto l = mixing_link(eta, r, 0.0);
      return xd * std::exp(l.log_p) - r * std::exp(l.log_q);
    }
    case CountModel::up: {
      const double lambda = 2.0 * std::exp(eta);
      const double ratio = std::exp(confluent_1f1_log(2.0, xd + 3.0, lambda).log_abs -
                                    confluent_1f1_log(1.0, xd + 2.0, lambda).log_abs);
      return xd - lambda + lambda * ratio / (xd + 2.0);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void check_shapes(const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                  std::span<const Count> y, bool needs_r) {
  if (static_cast<std::size_t>(design.rows()) != y.size()) {
    throw DomainError("design has " + std::to_string(design.rows()) + " rows but y has " +
                      std::to_string(y.size()) + " entries");
  }
  if (design.cols() != beta.size()) throw DomainError("beta length does not match the design columns");
  if (needs_r && !(r > 0.0 && std::isfinite(r))) throw DomainError("dispersion r must be positive and finite");
  for (Count x : y) {
    if (x < 0) throw DomainError("counts must be non-negative");
  }
}

double clamp_eta(double eta, LoglikGuards* guards) {
  if (std::abs(eta) <= kMaxLinearPredictor) return eta;
  if (guards) ++guards->clamped_predictors;
  return std::clamp(eta, -kMaxLinearPredictor, kMaxLinearPredictor);
}

}  // namespace

double reg_loglik(CountModel model, const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                  std::span<const Count> y, LoglikGuards* guards) {
  check_shapes(beta, r, design, y, model != CountModel::up);
  const Eigen::VectorXd eta = design * beta;
  const double log_floor = std::log(kPmfFloor);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = clamp_eta(eta[static_cast<Eigen::Index>(i)], guards);
    double lp = obs_log_pmf(model, e, r, y[i]);
    if (!(lp >= log_floor)) {
      if (guards) ++guards->floored_probabilities;
      lp = log_floor;
    }
    sum += lp;
  }
  return sum;
}

Eigen::VectorXd reg_gradient(CountModel model, const Eigen::VectorXd& beta, double r,
                             const Eigen::MatrixXd& design, std::span<const Count> y) {
  check_shapes(beta, r, design, y, model != CountModel::up);
  const Eigen::VectorXd eta = design * beta;
  const double log_floor = std::log(kPmfFloor);
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto x = y[static_cast<std::size_t>(i)];
    // Clamped predictors and floored probabilities are locally constant.
    if (std::abs(eta[i]) > kMaxLinearPredictor || !(obs_log_pmf(model, eta[i], r, x) >= log_floor)) {
      w[i] = 0.0;
    } else {
      w[i] = obs_dlog_deta(model, eta[i], r, x);
    }
  }
  return design.transpose() * w;
}

double unb_reg_loglik(const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                      std::span<const Count> y, LoglikGuards* guards) {
  return reg_loglik(CountModel::unb, beta, r, design, y, guards);
}

Eigen::VectorXd unb_reg_gradient(const Eigen::VectorXd& beta, double r, const Eigen::MatrixXd& design,
                                 std::span<const Count> y) {
  return reg_gradient(CountModel::unb, beta, r, design, y);
}

namespace {

bool has_intercept(const RegressionData& data) {
  return !data.coefficient_names.empty() && data.coefficient_names.front() == "(Intercept)";
}

double initial_r(CountModel model, std::span<const Count> y) {
  if (model == CountModel::unb) {
    try {
      const double r = fit_mm(y).params.r();
      if (std::isfinite(r) && r > 1e-3 && r < 1e3) return r;
    } catch (const Error&) {
    }
    return 2.0;
  }
  const auto m = sample_moments(y);
  const double var = m.m2 - m.m1 * m.m1;
  if (var > m.m1 && m.m1 > 0.0) {
    const double r = m.m1 * m.m1 / (var - m.m1);
    if (r > 1e-3 && r < 1e3) return r;
  }
  return 2.0;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

RegressionFit fit_regression(CountModel model, const RegressionData& data, double level,
                             const OptimOptions& optim) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  const auto& x = data.design;
  const std::span<const Count> y(data.y);
  const Eigen::Index k = x.cols();
  const bool with_r = model != CountModel::up;
  const auto n = y.size();
  if (static_cast<std::size_t>(x.rows()) != n) throw DataError("design rows do not match the response length");
  if (n <= static_cast<std::size_t>(k) + 1) {
    throw DataError("regression needs n > s + 2 observations (n = " + std::to_string(n) + ", " +
                    std::to_string(k) + " coefficients)");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) {
    throw RankDeficientError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(k) + " columns)");
  }
  double total = 0.0;
  for (Count v : y) total += static_cast<double>(v);
  if (total == 0.0) throw EstimationError("regression: all responses are zero, the mean is not identifiable");

  const Eigen::Index dim = k + (with_r ? 1 : 0);
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(dim);
  if (has_intercept(data)) theta0[0] = std::log(total / static_cast<double>(n) + 0.5 / static_cast<double>(n));
  if (with_r) theta0[k] = std::log(initial_r(model, y));

  auto split_r = [&](const Eigen::VectorXd& theta) { return with_r ? std::exp(theta[k]) : 1.0; };
  Objective f = [&](const Eigen::VectorXd& theta) {
    try {
      return reg_loglik(model, theta.head(k), split_r(theta), x, y);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  GradientFn grad = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g(dim);
    const Eigen::VectorXd beta = theta.head(k);
    try {
      g.head(k) = reg_gradient(model, beta, split_r(theta), x, y);
      if (with_r) {
        g[k] = central_difference(
            [&](double log_r) { return reg_loglik(model, beta, std::exp(log_r), x, y); }, theta[k], 1e-3);
      }
    } catch (const Error&) {
      g.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return g;
  };

  const OptimResult opt = maximize(f, grad, theta0, optim);

  RegressionFit fit;
  fit.model = model;
  fit.coefficient_names = data.coefficient_names;
  fit.beta = opt.x.head(k);
  if (with_r) fit.r = std::exp(opt.x[k]);
  fit.level = level;
  fit.n = n;
  fit.iterations = opt.iterations;
  fit.converged = opt.converged;
  fit.gradient_norm = opt.gradient.norm();

  LoglikGuards guards;
  fit.log_likelihood = reg_loglik(model, fit.beta, split_r(opt.x), x, y, &guards);
  fit.aic = -2.0 * fit.log_likelihood + 2.0 * static_cast<double>(dim);
  if (guards.clamped_predictors > 0) {
    fit.diagnostics.push_back(std::to_string(guards.clamped_predictors) +
                              " linear predictors clamped to |eta| <= 700 at the optimum");
  }
  if (guards.floored_probabilities > 0) {
    fit.diagnostics.push_back(std::to_string(guards.floored_probabilities) +
                              " fitted probabilities floored at 1e-300 at the optimum");
  }
  if (opt.used_simplex) fit.diagnostics.push_back("line search stalled; simplex fallback used");
  if (!fit.converged) {
    fit.diagnostics.push_back("gradient norm " + format_number(fit.gradient_norm) +
                              " above tolerance after " + std::to_string(opt.iterations) + " iterations");
  }

  // Observed information in the natural parameters (beta, r).
  Eigen::VectorXd natural(dim), steps(dim);
  natural.head(k) = fit.beta;
  for (Eigen::Index j = 0; j < k; ++j) steps[j] = 1e-4 * std::max(1.0, std::abs(fit.beta[j]));
  if (with_r) {
    natural[k] = *fit.r;
    steps[k] = std::min(1e-4 * std::max(1.0, *fit.r), *fit.r / 2.0);
  }
  Objective f_natural = [&](const Eigen::VectorXd& v) {
    return reg_loglik(model, v.head(k), with_r ? v[k] : 1.0, x, y);
  };
  const Eigen::MatrixXd info = -numerical_hessian(f_natural, natural, steps);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.std_errors = Eigen::VectorXd::Constant(dim, nan);
  fit.wald_t = Eigen::VectorXd::Constant(dim, nan);
  fit.p_values = Eigen::VectorXd::Constant(dim, nan);
  fit.conf_intervals.assign(static_cast<std::size_t>(dim), Interval{nan, nan});
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    fit.diagnostics.push_back("observed information is not positive definite; standard errors unavailable");
    fit.covariance = Eigen::MatrixXd::Constant(dim, dim, nan);
    return fit;
  }
  fit.covariance = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  const double z = normal_quantile(0.5 + level / 2.0);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double se = std::sqrt(fit.covariance(j, j));
    const double est = natural[j];
    fit.std_errors[j] = se;
    if (se > 0.0) {
      fit.wald_t[j] = est / se;
      fit.p_values[j] = normal_two_sided_p(fit.wald_t[j]);
    }
    fit.conf_intervals[static_cast<std::size_t>(j)] = {est - z * se, est + z * se};
  }
  return fit;
}

RegressionFit fit_unb_regression(const Dataset& data, const RegressionSpec& spec, double level) {
  return fit_regression(CountModel::unb, build_design(data, spec), level);
}

RegressionFit fit_nb_regression(const Dataset& data, const RegressionSpec& spec, double level) {
  return fit_regression(CountModel::nb, build_design(data, spec), level);
}

RegressionFit fit_up_regression(const Dataset& data, const RegressionSpec& spec, double level) {
  return fit_regression(CountModel::up, build_design(data, spec), level);
}

Eigen::VectorXd fitted_pmf(const RegressionFit& fit, const RegressionData& data) {
  const double r = fit.r.value_or(1.0);
  check_shapes(fit.beta, r, data.design, data.y, fit.model != CountModel::up);
  const Eigen::VectorXd eta = data.design * fit.beta;
  Eigen::VectorXd out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = clamp_eta(eta[i], nullptr);
    out[i] = std::max(kPmfFloor, std::exp(obs_log_pmf(fit.model, e, r, data.y[static_cast<std::size_t>(i)])));
  }
  return out;
}

VuongResult vuong_test(std::span<const double> pmf1, std::span<const double> pmf2) {
  if (pmf1.size() != pmf2.size()) throw DomainError("vuong_test: probability vectors differ in length");
  if (pmf1.size() < 2) throw DomainError("vuong_test: at least two observations are required");
  const std::size_t n = pmf1.size();
  std::vector<double> ratio(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pmf1[i], b = pmf2[i];
    if (!(a > 0.0 && a <= 1.0) || !(b > 0.0 && b <= 1.0)) {
      throw DomainError("vuong_test: probabilities must lie in (0, 1] (observation " + std::to_string(i + 1) + ")");
    }
    ratio[i] = std::log(a) - std::log(b);
  }
  double sum = 0.0;
  for (double v : ratio) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : ratio) ss += (v - mean) * (v - mean);
  VuongResult res;
  res.n = n;
  res.omega = std::sqrt(ss / static_cast<double>(n));
  if (res.omega < 1e-12) {
    throw DegenerateComparisonError("vuong_test: log-likelihood ratios have zero spread; the models are "
                                    "observationally identical");
  }
  res.z = sum / (res.omega * std::sqrt(static_cast<double>(n)));
  res.p_value = normal_two_sided_p(res.z);
  return res;
}

VuongResult vuong_test(const Eigen::VectorXd& pmf1, const Eigen::VectorXd& pmf2) {
  return vuong_test(std::span<const double>(pmf1.data(), static_cast<std::size_t>(pmf1.size())),
                    std::span<const double>(pmf2.data(), static_cast<std::size_t>(pmf2.size())));
}

}  // namespace unb
