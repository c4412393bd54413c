#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "unb/distributions.hpp"
#include "unb/errors.hpp"

using namespace unb;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// MGF from summing the mixture in closed form,
//   p^r / (q (e^t - 1)(r - 1)) [(1 - q e^t)^(1-r) - p^(1-r)],
// evaluated in long double away from t = 0 and r = 1.
double mgf_closed_form(double r, double p, double t) {
  using R = long double;
  const R rr = r, pp = p, q = 1 - pp, et = std::exp(static_cast<R>(t));
  const R bracket = std::pow(1 - q * et, 1 - rr) - std::pow(pp, 1 - rr);
  return static_cast<double>(std::pow(pp, rr) / (q * (et - 1) * (rr - 1)) * bracket);
}

// E[e^{tX}] by direct summation over the mixture-oracle pmf.
double mgf_series(double r, double p, double t) {
  long double sum = 0;
  for (Count x = 0;; ++x) {
    const long double term = std::exp(static_cast<long double>(t) * x) * oracle::mixture_pmf(r, p, x);
    sum += term;
    if (x > 20 && term < 1e-20L * sum) break;
  }
  return static_cast<double>(sum);
}

}  // namespace

TEST(Params, Validation) {
  EXPECT_THROW(UnbParams(0.0, 0.5), DomainError);
  EXPECT_THROW(UnbParams(1.0, 0.0), DomainError);
  EXPECT_THROW(UnbParams(1.0, 1.0), DomainError);
  EXPECT_THROW(UnbParams(std::nan(""), 0.5), DomainError);
  EXPECT_THROW(NbParams(-1.0, 0.5), DomainError);
  EXPECT_THROW(UpParams(0.0), DomainError);
  EXPECT_THROW(GeomParams(1.5), DomainError);
  EXPECT_DOUBLE_EQ(UnbParams(2.0, 0.25).q(), 0.75);
  EXPECT_THROW(unb_pmf(UnbParams(2.0, 0.5), -1), DomainError);
}

TEST(UnbPmf, Examples) {
  // Geometric reduction: p (1 - p)^x = 0.5^4.
  EXPECT_NEAR(unb_pmf(UnbParams(2, 0.5), 3), 0.0625, 1e-15);
  EXPECT_NEAR(unb_pmf(UnbParams(3, 0.5), 0), 0.375, 1e-14);
  EXPECT_NEAR(unb_pmf(UnbParams(1, 0.5), 0), std::log(2.0), 1e-14);
}

TEST(UnbPmf, MatchesMixtureOracle) {
  for (const auto& [r, p] : gen::grid()) {
    for (Count x : {0, 1, 2, 5, 13, 40}) {
      const double ref = static_cast<double>(oracle::mixture_pmf(r, p, x));
      EXPECT_LT(rel_err(unb_pmf(UnbParams(r, p), x), ref), 1e-12) << "r=" << r << " p=" << p << " x=" << x;
    }
  }
}

TEST(UnbPmfProperty, MatchesMixtureOracleRandom) {
  gen::Rng rng(21);
  for (int i = 0; i < 150; ++i) {
    const double r = rng.log_uniform(0.05, 60), p = rng.uniform(0.02, 0.98);
    const Count x = rng.integer(0, 80);
    const double ref = static_cast<double>(oracle::mixture_pmf(r, p, x));
    EXPECT_LT(rel_err(unb_pmf(UnbParams(r, p), x), ref), 1e-11) << "r=" << r << " p=" << p << " x=" << x;
  }
}

TEST(UnbPmf, ExtremeRegimesStayFinite) {
  for (const auto& [r, p] : {std::pair{0.05, 0.001}, std::pair{50.0, 0.002}, std::pair{1e4, 0.3}, std::pair{0.5, 0.9999}}) {
    for (Count x : {0, 10, 1000}) {
      const double lp = unb_log_pmf(UnbParams(r, p), x);
      EXPECT_TRUE(std::isfinite(lp)) << r << " " << p << " " << x;
      EXPECT_LT(lp, 0.0);
    }
  }
}

TEST(UnbPmfProperty, Normalization) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    const Count cutoff = nb_tail_cutoff(NbParams(r, p), 1e-12);
    double sum = 0;
    for (Count x = 0; x <= cutoff; ++x) sum += unb_pmf(params, x);
    EXPECT_GE(sum, 1 - 1e-9) << "r=" << r << " p=" << p;
    EXPECT_LE(sum, 1 + 1e-9);
  }
}

TEST(UnbPmfProperty, RecurrenceVectorMatchesDirect) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    const auto v = unb_pmf_vector(params, 50);
    ASSERT_EQ(v.size(), 51);
    for (Count x = 0; x <= 50; ++x) {
      EXPECT_NEAR(v[x], unb_pmf(params, x), 1e-12) << "r=" << r << " p=" << p << " x=" << x;
    }
  }
}

TEST(UnbPmfVector, Examples) {
  const auto geo = unb_pmf_vector(UnbParams(2, 0.5), 10);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(geo[k], std::pow(0.5, k + 1), 1e-15);
  const auto v = unb_pmf_vector(UnbParams(1, 0.3), 5);
  EXPECT_NEAR(v[0], -0.3 * std::log(0.3) / 0.7, 1e-15);
}

// p(x) - p(x+1) = p^r q^x C(r+x-1, x) / (x+1) > 0. When that gap is below
// double resolution of p(x) (e.g. p^r = 1e-20 at r = 20, p = 0.1) the two
// values round to the same double, so strictness is only asserted where the
// gap is resolvable.
TEST(UnbPmfProperty, StrictlyDecreasing) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    double prev = unb_log_pmf(params, 0);
    for (Count x = 0; x < 200; ++x) {
      const double cur = unb_log_pmf(params, x + 1);
      const double log_gap = nb_log_pmf(NbParams(r, p), x) - std::log(static_cast<double>(x) + 1);
      if (log_gap - prev > std::log(1e-13)) {
        ASSERT_LT(cur, prev) << "r=" << r << " p=" << p << " x=" << x;
      } else {
        ASSERT_LE(cur, prev + 1e-15) << "r=" << r << " p=" << p << " x=" << x;
      }
      prev = cur;
    }
  }
}

TEST(UnbPmfProperty, RatioRecurrence) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    for (Count x = 0; x <= 40; ++x) {
      const double direct = std::exp(unb_log_pmf(params, x + 1) - unb_log_pmf(params, x));
      EXPECT_LT(rel_err(unb_pmf_ratio(params, x), direct), 1e-10) << "r=" << r << " p=" << p << " x=" << x;
    }
  }
}

TEST(UnbPmfProperty, ThreeTermRecurrenceInR) {
  for (double r : {1.5, 3.0, 7.0}) {
    for (double p : {0.2, 0.5, 0.8}) {
      const double q = 1 - p;
      for (Count x = 0; x <= 20; ++x) {
        const double xd = static_cast<double>(x);
        const double rhs = r / ((r - 1) * (r + xd) * p) *
                           ((2 * r + xd - (r + xd) * q) * unb_pmf(UnbParams(r + 1, p), x) -
                            (r + 1) * unb_pmf(UnbParams(r + 2, p), x));
        EXPECT_LT(rel_err(unb_pmf(UnbParams(r, p), x), rhs), 1e-10) << "r=" << r << " p=" << p << " x=" << x;
      }
    }
  }
}

TEST(UnbCdf, Examples) {
  const UnbParams params(3, 0.5);
  EXPECT_NEAR(unb_cdf(params, 0), 0.375, 1e-15);
  double partial = 0;
  for (Count k = 0; k <= 8; ++k) partial += static_cast<double>(oracle::mixture_pmf(3, 0.5, k));
  EXPECT_NEAR(unb_cdf(params, 8), partial, 1e-12);
  EXPECT_NEAR(unb_cdf(params, 200), 1.0, 1e-10);
}

TEST(UnbCdfProperty, MatchesPartialSumsAndIsMonotone) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    double partial = 0, prev = 0;
    for (Count x = 0; x <= 60; ++x) {
      partial += unb_pmf(params, x);
      const double c = unb_cdf(params, x);
      EXPECT_NEAR(c, partial, 1e-11) << "r=" << r << " p=" << p << " x=" << x;
      EXPECT_GE(c, prev - 1e-15);
      EXPECT_LE(c, 1.0 + 1e-15);
      prev = c;
    }
  }
}

TEST(UnbReductions, GeometricAtRTwo) {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (Count x = 0; x <= 60; ++x) {
      EXPECT_NEAR(unb_pmf(UnbParams(2, p), x), p * std::pow(1 - p, static_cast<double>(x)), 1e-13);
    }
  }
}

TEST(UnbReductions, LerchAtROne) {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double q = 1 - p;
    for (Count x = 0; x <= 60; ++x) {
      const double xd = static_cast<double>(x);
      const double ref = p * std::pow(q, xd) * static_cast<double>(oracle::lerch(q, xd + 1));
      EXPECT_LT(rel_err(unb_pmf(UnbParams(1, p), x), ref), 1e-12) << "p=" << p << " x=" << x;
    }
  }
  EXPECT_NEAR(0.5 * lerch_phi(0.5, 1.0), 0.693147180559945, 1e-12);
}

TEST(UnbReductions, UniformPoissonLimit) {
  for (double lambda : {0.5, 2.0, 6.0}) {
    double last = 1.0;
    for (double r : {50.0, 200.0, 800.0}) {
      const UnbParams params(r, 1.0 / (1.0 + lambda / r));
      double dist = 0;
      for (Count x = 0; x <= 50; ++x) dist = std::max(dist, std::abs(unb_pmf(params, x) - up_pmf(UpParams(lambda), x)));
      EXPECT_LT(dist, last) << "lambda=" << lambda << " r=" << r;
      last = dist;
    }
  }
  double dist400 = 0;
  for (Count x = 0; x <= 50; ++x) {
    dist400 = std::max(dist400, std::abs(unb_pmf(UnbParams(400, 1.0 / 1.005), x) - up_pmf(UpParams(2.0), x)));
  }
  EXPECT_LT(dist400, 2e-3);
}

TEST(UnbMoments, Examples) {
  const UnbParams params(3, 0.5);
  EXPECT_NEAR(unb_mean(params), 1.5, 1e-15);
  EXPECT_NEAR(unb_variance(params), 3.25, 1e-14);
  EXPECT_NEAR(unb_dispersion_index(params), 13.0 / 6.0, 1e-14);
  EXPECT_NEAR(unb_mean(UnbParams(2, 0.5)), 1.0, 1e-15);
}

TEST(UnbMomentsProperty, MatchTruncatedSeries) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    const Count cutoff = nb_tail_cutoff(NbParams(r, p), 1e-22);
    long double s1 = 0, s2 = 0;
    for (Count x = 1; x <= cutoff; ++x) {
      const long double f = unb_pmf(params, x);
      s1 += x * f;
      s2 += static_cast<long double>(x) * x * f;
    }
    const double mean = static_cast<double>(s1), var = static_cast<double>(s2 - s1 * s1);
    EXPECT_LT(rel_err(unb_mean(params), mean), 1e-9) << "r=" << r << " p=" << p;
    EXPECT_LT(rel_err(unb_second_moment(params), static_cast<double>(s2)), 1e-9) << "r=" << r << " p=" << p;
    EXPECT_LT(rel_err(unb_variance(params), var), 1e-9) << "r=" << r << " p=" << p;
    EXPECT_GT(unb_dispersion_index(params), 1.0);
  }
}

TEST(UnbMomentsProperty, OverdispersedEverywhere) {
  gen::Rng rng(22);
  for (int i = 0; i < 500; ++i) {
    const UnbParams params(rng.log_uniform(1e-3, 1e3), rng.uniform(1e-3, 0.999));
    EXPECT_GT(unb_dispersion_index(params), 1.0);
  }
}

TEST(UnbMgf, Normalization) {
  for (const auto& [r, p] : gen::grid()) {
    EXPECT_NEAR(unb_mgf(UnbParams(r, p), 0.0), 1.0, 1e-15);
    EXPECT_NEAR(unb_pgf(UnbParams(r, p), 1.0), 1.0, 1e-15);
  }
}

TEST(UnbMgf, DerivativeGivesMean) {
  const UnbParams params(3, 0.5);
  const double h = 1e-5;
  EXPECT_NEAR((unb_mgf(params, h) - unb_mgf(params, -h)) / (2 * h), 1.5, 1e-4);
}

TEST(UnbMgf, MatchesClosedForm) {
  for (const auto& [r, p] : gen::grid()) {
    if (r == 1.0) continue;
    const double tmax = -std::log(1 - p);
    for (double frac : {-2.0, -0.5, 0.3, 0.9}) {
      const double t = frac * tmax;
      EXPECT_LT(rel_err(unb_mgf(UnbParams(r, p), t), mgf_closed_form(r, p, t)), 1e-11)
          << "r=" << r << " p=" << p << " t=" << t;
    }
  }
}

TEST(UnbMgf, MatchesSeries) {
  for (const auto& [r, p] : gen::grid()) {
    const double tmax = -std::log(1 - p);
    for (double frac : {-1.0, -1e-7, 1e-7, 0.2, 0.5}) {
      const double t = frac * tmax;
      EXPECT_LT(rel_err(unb_mgf(UnbParams(r, p), t), mgf_series(r, p, t)), 1e-12)
          << "r=" << r << " p=" << p << " t=" << t;
    }
  }
}

TEST(UnbMgf, SmoothThroughROne) {
  const double t = 0.2, p = 0.5;
  const double at_one = unb_mgf(UnbParams(1.0, p), t);
  EXPECT_NEAR(unb_mgf(UnbParams(1.0 + 1e-7, p), t), at_one, 1e-6);
  EXPECT_NEAR(unb_mgf(UnbParams(1.0 - 1e-7, p), t), at_one, 1e-6);
  // Direct series check at r = 1.
  double series = 0;
  for (Count x = 0; x < 400; ++x) series += std::exp(t * static_cast<double>(x)) * unb_pmf(UnbParams(1.0, p), x);
  EXPECT_NEAR(at_one, series, 1e-11);
}

TEST(UnbMgf, DomainError) {
  EXPECT_THROW(unb_mgf(UnbParams(3, 0.5), std::log(2.0)), DomainError);
  EXPECT_THROW(unb_pgf(UnbParams(3, 0.5), 2.0), DomainError);
  EXPECT_THROW(unb_pgf(UnbParams(3, 0.5), -2.5), DomainError);
}

TEST(UnbPgf, MatchesTruncatedSeries) {
  const UnbParams params(3, 0.5);
  double series = 0;
  for (Count x = 0; x < 200; ++x) series += std::pow(0.3, static_cast<double>(x)) * unb_pmf(params, x);
  EXPECT_NEAR(unb_pgf(params, 0.3), series, 1e-10);
  EXPECT_NEAR(unb_pgf(params, 0.0), 0.375, 1e-15);
}

TEST(UnbPgfProperty, AgreesWithMgfOfLog) {
  for (const auto& [r, p] : gen::grid()) {
    const UnbParams params(r, p);
    const double q = 1 - p;
    for (double frac : {0.1, 0.4, 0.7, 0.95}) {
      const double s = q + frac * (1 / q - q);
      EXPECT_LT(rel_err(unb_mgf(params, std::log(s)), unb_pgf(params, s)), 1e-11) << r << " " << p << " " << s;
    }
  }
}

TEST(UnbSample, Deterministic) {
  const UnbParams params(3, 0.5);
  EXPECT_EQ(unb_sample(params, 1000, 7), unb_sample(params, 1000, 7));
  EXPECT_NE(unb_sample(params, 1000, 7), unb_sample(params, 1000, 8));
}

TEST(UnbSample, MomentsAndZeros) {
  const auto xs = unb_sample(UnbParams(3, 0.5), 100000, 42);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / 1e5;
  EXPECT_NEAR(mean, 1.5, 3 * std::sqrt(3.25 / 1e5));
  const auto geo = unb_sample(UnbParams(2, 0.5), 100000, 43);
  const double zeros = static_cast<double>(std::count(geo.begin(), geo.end(), 0)) / 1e5;
  EXPECT_NEAR(zeros, 0.5, 3 * std::sqrt(0.25 / 1e5));
}

TEST(UnbSample, PearsonGoodnessOfFit) {
  const UnbParams params(3, 0.5);
  const std::size_t n = 100000;
  const auto xs = unb_sample(params, n, 2024);
  std::vector<double> observed(11, 0.0), expected(11, 0.0);
  for (Count x : xs) observed[static_cast<std::size_t>(std::min<Count>(x, 10))] += 1;
  double head = 0;
  for (Count k = 0; k < 10; ++k) {
    const double pk = static_cast<double>(oracle::mixture_pmf(3, 0.5, k));
    expected[static_cast<std::size_t>(k)] = n * pk;
    head += pk;
  }
  expected[10] = n * (1 - head);
  double chi2 = 0;
  for (std::size_t b = 0; b < 11; ++b) chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
  // 99th percentile of chi-square with 10 degrees of freedom.
  EXPECT_LT(chi2, 23.209);
}

TEST(UpPmf, Examples) {
  double sum = 0;
  for (Count x = 0; x <= 100; ++x) sum += up_pmf(UpParams(1.0), x);
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(up_pmf(UpParams(2.0), 0), (1 - std::exp(-2.0)) / 2.0, 1e-15);
  for (double lambda : {0.3, 4.0, 25.0}) {
    for (Count x : {0, 3, 17}) {
      const double ref = static_cast<double>(oracle::up_mixture_pmf(lambda, x));
      EXPECT_LT(rel_err(up_pmf(UpParams(lambda), x), ref), 1e-12) << lambda << " " << x;
    }
  }
}

TEST(NbPmf, Examples) {
  for (Count x = 0; x < 20; ++x) EXPECT_NEAR(nb_pmf(NbParams(1, 0.3), x), 0.3 * std::pow(0.7, static_cast<double>(x)), 1e-15);
  EXPECT_LT(rel_err(nb_pmf(NbParams(2.5, 0.4), 3), static_cast<double>(oracle::nb_pmf(2.5, 0.4, 3))), 1e-13);
  EXPECT_NEAR(geom_pmf(GeomParams(0.5), 2), 0.125, 1e-16);
}

TEST(NbCdf, MatchesSumsAndCutoff) {
  const NbParams params(2.5, 0.4);
  double sum = 0;
  for (Count x = 0; x <= 30; ++x) {
    sum += static_cast<double>(oracle::nb_pmf(2.5, 0.4, x));
    EXPECT_NEAR(nb_cdf(params, x), sum, 1e-14);
  }
  const Count cut = nb_tail_cutoff(params, 1e-12);
  EXPECT_LT(1 - nb_cdf(params, cut), 1e-12);
  EXPECT_GE(1 - nb_cdf(params, cut - 1), 1e-12 * 0.5);
}
