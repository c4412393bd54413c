#include "unb/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace unb {

namespace {

void require_count(Count x, const char* name) {
  if (x < 0) throw DomainError(std::string(name) + ": x must be non-negative");
}

void require_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(name) + ": p must lie in (0, 1)");
}

void require_shape(double r, const char* name) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError(std::string(name) + ": r must be positive");
}

// ln C(r+x-1, x) = ln Gamma(r+x) - ln Gamma(r) - ln x!
double log_nb_coefficient(double r, Count x) {
  const double xd = static_cast<double>(x);
  return std::lgamma(r + xd) - std::lgamma(r) - std::lgamma(xd + 1.0);
}

// x * ln q with 0 * ln 0 = 0.
double x_log(Count x, double log_q) { return x == 0 ? 0.0 : static_cast<double>(x) * log_q; }

// p(0) = (p - p^r) / ((1 - p)(r - 1)), with the r = 1 limit -p ln p / (1 - p).
double unb_p0(double r, double p, double q) {
  const double log_p = std::log(p);
  if (r == 1.0) return -p * log_p / q;
  return -p * std::expm1((r - 1.0) * log_p) / (q * (r - 1.0));
}

}  // namespace

UnbParams::UnbParams(double r, double p) : r_(r), p_(p) {
  require_shape(r, "UnbParams");
  require_probability(p, "UnbParams");
}

NbParams::NbParams(double r, double p) : r_(r), p_(p) {
  require_shape(r, "NbParams");
  require_probability(p, "NbParams");
}

UpParams::UpParams(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("UpParams: lambda must be positive");
  }
}

GeomParams::GeomParams(double p) : p_(p) { require_probability(p, "GeomParams"); }

namespace detail {

double power_ratio(double w, double r) {
  const double l = std::log1p(-w);
  if (r == 1.0) return -l;
  return std::expm1((1.0 - r) * l) / (r - 1.0);
}

double unb_log_pmf(double r, double log_p, double log_q, Count x, const SeriesControl& ctrl) {
  require_count(x, "unb_pmf");
  const double p = std::exp(log_p);
  const double q = std::exp(log_q);
  const double xd = static_cast<double>(x);
  const double log_prefactor =
      x_log(x, log_q) + r * log_p - std::log1p(xd) + log_nb_coefficient(r, x);

  if (q <= 0.75 || r < 2.0) {
    return log_prefactor + gauss_2f1_log(1.0, r + xd, 2.0 + xd, q, ctrl).log_abs;
  }

  // Near q = 1 with r >= 2: walk the subtractive recurrence from p(0).
  const double p0 = unb_p0(r, p, q);
  double current = p0;
  double log_term = r * log_p;  // ln of p^r q^k C(r+k-1, k), k = 0
  for (Count k = 0; k < x; ++k) {
    const double kd = static_cast<double>(k);
    current -= std::exp(log_term - std::log1p(kd));
    log_term += log_q + std::log((r + kd) / (kd + 1.0));
  }
  // Too much of p(0) has cancelled away; the direct series is safer here.
  if (!(current > 1e-4 * p0)) {
    return log_prefactor + gauss_2f1_log(1.0, r + xd, 2.0 + xd, q, ctrl).log_abs;
  }
  return std::log(current);
}

double nb_log_pmf(double r, double log_p, double log_q, Count x) {
  require_count(x, "nb_pmf");
  return log_nb_coefficient(r, x) + r * log_p + x_log(x, log_q);
}

double unb_log_hyp_dz(double r, double q, Count x, const SeriesControl& ctrl) {
  const double xd = static_cast<double>(x);
  const double scale = (r + xd) / (2.0 + xd);
  if (q == 0.0) return scale;
  const auto upper = gauss_2f1_log(2.0, r + xd + 1.0, 3.0 + xd, q, ctrl);
  const auto lower = gauss_2f1_log(1.0, r + xd, 2.0 + xd, q, ctrl);
  return scale * std::exp(upper.log_abs - lower.log_abs);
}

}  // namespace detail

// ---------------------------------------------------------------------------

double unb_log_pmf(const UnbParams& params, Count x, const SeriesControl& ctrl) {
  return detail::unb_log_pmf(params.r(), std::log(params.p()), std::log1p(-params.p()), x, ctrl);
}

double unb_pmf(const UnbParams& params, Count x, const SeriesControl& ctrl) {
  return std::exp(unb_log_pmf(params, x, ctrl));
}

Eigen::VectorXd unb_pmf_vector(const UnbParams& params, Count x_max) {
  require_count(x_max, "unb_pmf_vector");
  const double r = params.r();
  const double p = params.p();
  const double q = params.q();
  const double log_q = std::log1p(-p);

  Eigen::VectorXd out(x_max + 1);
  out[0] = unb_p0(r, p, q);
  double log_term = r * std::log(p);
  for (Count k = 0; k < x_max; ++k) {
    const double kd = static_cast<double>(k);
    out[k + 1] = out[k] - std::exp(log_term - std::log1p(kd));
    log_term += log_q + std::log((r + kd) / (kd + 1.0));
  }
  return out;
}

double unb_pmf_ratio(const UnbParams& params, Count x, const SeriesControl& ctrl) {
  require_count(x, "unb_pmf_ratio");
  const double r = params.r();
  const double q = params.q();
  const double xd = static_cast<double>(x);
  const auto next = gauss_2f1_log(1.0, r + xd + 1.0, 3.0 + xd, q, ctrl);
  const auto here = gauss_2f1_log(1.0, r + xd, 2.0 + xd, q, ctrl);
  return q * (r + xd) / (xd + 2.0) * std::exp(next.log_abs - here.log_abs);
}

double unb_cdf(const UnbParams& params, Count x, const SeriesControl& ctrl) {
  require_count(x, "unb_cdf");
  const double r = params.r();
  const double p = params.p();
  const double q = params.q();
  const double xd = static_cast<double>(x);
  const double nb_part = nb_cdf(NbParams(r, p), x);
  const double log_tail = std::log((r + xd) / (xd + 2.0)) + log_nb_coefficient(r, x) +
                          r * std::log(p) + (xd + 1.0) * std::log1p(-p) +
                          gauss_2f1_log(1.0, r + xd + 1.0, xd + 3.0, q, ctrl).log_abs;
  return std::min(1.0, nb_part + std::exp(log_tail));
}

double unb_mean(const UnbParams& params) {
  return params.r() * params.q() / (2.0 * params.p());
}

double unb_second_moment(const UnbParams& params) {
  const double r = params.r();
  const double odds = params.q() / params.p();
  return (3.0 * r * odds + 2.0 * r * (r + 1.0) * odds * odds) / 6.0;
}

double unb_variance(const UnbParams& params) {
  const double r = params.r();
  const double odds = params.q() / params.p();
  return r * odds / 12.0 * (6.0 + 4.0 * odds + r * odds);
}

double unb_dispersion_index(const UnbParams& params) {
  const double odds = params.q() / params.p();
  return 1.0 + 4.0 * odds / 6.0 + params.r() * odds / 6.0;
}

namespace {

// E[s^X] with s = 1 + d. Since (1 - q s) / p = 1 - w for w = q d / p, the sum
// p^r / (q d) [B(q s) - B(q)], B(v) = ((1 - v)^(1-r) - 1) / (r - 1), is
// B(w) / w, which has no cancellation near d = 0.
double pgf_shifted(const UnbParams& params, double d) {
  const double w = params.q() * d / params.p();
  if (w == 0.0) return 1.0;
  if (std::abs(w) < 1e-300) return 1.0 + params.r() * w / 2.0;
  return detail::power_ratio(w, params.r()) / w;
}

}  // namespace

double unb_mgf(const UnbParams& params, double t) {
  if (!(t < -std::log(params.q()))) throw DomainError("unb_mgf: requires t < -ln q");
  return pgf_shifted(params, std::expm1(t));
}

double unb_pgf(const UnbParams& params, double s) {
  if (!(std::abs(s) < 1.0 / params.q())) throw DomainError("unb_pgf: requires |s| < 1/q");
  return pgf_shifted(params, s - 1.0);
}

std::vector<Count> unb_sample(const UnbParams& params, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::gamma_distribution<double> rate(params.r(), params.q() / params.p());
  std::vector<Count> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = rate(engine);
    Count latent = 0;
    if (lambda > 0.0) latent = std::poisson_distribution<Count>(lambda)(engine);
    out.push_back(std::uniform_int_distribution<Count>(0, latent)(engine));
  }
  return out;
}

// ---------------------------------------------------------------------------

double up_log_pmf(const UpParams& params, Count x, const SeriesControl& ctrl) {
  require_count(x, "up_pmf");
  const double lambda = params.lambda();
  const double xd = static_cast<double>(x);
  return x_log(x, std::log(lambda)) - lambda - std::lgamma(xd + 2.0) +
         confluent_1f1_log(1.0, xd + 2.0, lambda, ctrl).log_abs;
}

double up_pmf(const UpParams& params, Count x, const SeriesControl& ctrl) {
  return std::exp(up_log_pmf(params, x, ctrl));
}

double nb_log_pmf(const NbParams& params, Count x) {
  return detail::nb_log_pmf(params.r(), std::log(params.p()), std::log1p(-params.p()), x);
}

double nb_pmf(const NbParams& params, Count x) { return std::exp(nb_log_pmf(params, x)); }

double nb_cdf(const NbParams& params, Count x) {
  require_count(x, "nb_cdf");
  const Count last = std::min(x, nb_tail_cutoff(params, 1e-17));
  const double r = params.r();
  const double log_q = std::log1p(-params.p());
  double log_term = r * std::log(params.p());
  double sum = 0.0;
  for (Count k = 0; k <= last; ++k) {
    sum += std::exp(log_term);
    const double kd = static_cast<double>(k);
    log_term += log_q + std::log((r + kd) / (kd + 1.0));
  }
  return std::min(1.0, sum);
}

Count nb_tail_cutoff(const NbParams& params, double eps) {
  const double r = params.r();
  const double q = params.q();
  const double log_q = std::log(q);
  double log_term = r * std::log(params.p());
  for (Count k = 0;; ++k) {
    const double kd = static_cast<double>(k);
    // Successive pmf ratios q (r+k)/(k+1) are monotone in k and tend to q,
    // so the tail beyond k is bounded by a geometric series.
    const double ratio = q * (r + kd) / (kd + 1.0);
    const double bound_ratio = std::max(ratio, q);
    if (bound_ratio < 1.0) {
      const double log_tail = log_term + std::log(bound_ratio / (1.0 - bound_ratio));
      if (log_tail < std::log(eps)) return k;
    }
    log_term += log_q + std::log((r + kd) / (kd + 1.0));
  }
}

double geom_log_pmf(const GeomParams& params, Count x) {
  require_count(x, "geom_pmf");
  return std::log(params.p()) + x_log(x, std::log1p(-params.p()));
}

double geom_pmf(const GeomParams& params, Count x) { return std::exp(geom_log_pmf(params, x)); }

}  // namespace unb
