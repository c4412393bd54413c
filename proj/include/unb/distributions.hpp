#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "unb/specfun.hpp"

namespace unb {

/// Parameters of the uniform-negative-binomial law: X | N ~ U{0..N},
/// N ~ NB(r, p). Only p is stored; q = 1 - p is derived.
class UnbParams {
 public:
  UnbParams(double r, double p);

  double r() const { return r_; }
  double p() const { return p_; }
  double q() const { return 1.0 - p_; }

 private:
  double r_;
  double p_;
};

/// Negative binomial with pmf C(r+n-1, n) p^r q^n (mean rq/p).
class NbParams {
 public:
  NbParams(double r, double p);

  double r() const { return r_; }
  double p() const { return p_; }
  double q() const { return 1.0 - p_; }

 private:
  double r_;
  double p_;
};

/// Uniform-Poisson: X | N ~ U{0..N}, N ~ Poisson(lambda).
class UpParams {
 public:
  explicit UpParams(double lambda);
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

/// Geometric on {0, 1, ...} with pmf p (1-p)^x.
class GeomParams {
 public:
  explicit GeomParams(double p);
  double p() const { return p_; }

 private:
  double p_;
};

using Count = std::int64_t;

// ---------------------------------------------------------------------------
// Uniform-negative-binomial

double unb_log_pmf(const UnbParams& params, Count x, const SeriesControl& ctrl = {});
double unb_pmf(const UnbParams& params, Count x, const SeriesControl& ctrl = {});

/// p(0..x_max) from the closed-form p(0) and the subtractive recurrence
/// p(x+1) = p(x) - p^r q^x C(r+x-1, r-1) / (x+1). No hypergeometric series.
Eigen::VectorXd unb_pmf_vector(const UnbParams& params, Count x_max);

/// p(x+1) / p(x) through the ratio of neighbouring 2F1 values.
double unb_pmf_ratio(const UnbParams& params, Count x, const SeriesControl& ctrl = {});

/// P(X <= x) = F_NB(x) + (r+x)/(x+2) C(r+x-1, x) p^r q^(x+1) 2F1(1, r+x+1; x+3; q).
double unb_cdf(const UnbParams& params, Count x, const SeriesControl& ctrl = {});

double unb_mean(const UnbParams& params);
double unb_second_moment(const UnbParams& params);
double unb_variance(const UnbParams& params);
double unb_dispersion_index(const UnbParams& params);

/// E[exp(tX)], defined for t < -ln q.
double unb_mgf(const UnbParams& params, double t);
/// E[s^X], defined for |s| < 1/q.
double unb_pgf(const UnbParams& params, double s);

/// Draws N ~ NB(r, p) as a gamma-mixed Poisson, then X uniform on {0..N}.
/// The same (params, n, seed) always yields the same sequence.
std::vector<Count> unb_sample(const UnbParams& params, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Comparator laws

double up_log_pmf(const UpParams& params, Count x, const SeriesControl& ctrl = {});
double up_pmf(const UpParams& params, Count x, const SeriesControl& ctrl = {});

double nb_log_pmf(const NbParams& params, Count x);
double nb_pmf(const NbParams& params, Count x);
double nb_cdf(const NbParams& params, Count x);
/// Smallest x with P(N > x) < eps.
Count nb_tail_cutoff(const NbParams& params, double eps = 1e-12);

double geom_log_pmf(const GeomParams& params, Count x);
double geom_pmf(const GeomParams& params, Count x);

namespace detail {

// Log-pmf evaluations taking ln p and ln q separately, so that callers that
// know both accurately (regression links) do not lose digits in 1 - p.
double unb_log_pmf(double r, double log_p, double log_q, Count x, const SeriesControl& ctrl);
double nb_log_pmf(double r, double log_p, double log_q, Count x);

/// d/dz log 2F1(1, r+x; 2+x; z) at z = q, i.e.
/// (r+x)/(2+x) * 2F1(2, r+x+1; 3+x; q) / 2F1(1, r+x; 2+x; q).
double unb_log_hyp_dz(double r, double q, Count x, const SeriesControl& ctrl);

/// ((1 - w)^(1-r) - 1) / (r - 1), continuous through r = 1.
double power_ratio(double w, double r);

}  // namespace detail

}  // namespace unb
