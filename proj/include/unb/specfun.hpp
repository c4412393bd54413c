#pragma once

// Special functions needed by the uniform-negative-binomial family:
// log-gamma and its derivatives, Gauss 2F1, Kummer 1F1, the s = 1 Lerch
// transcendent and the Kampe de Feriet-like double series that gives the
// b-derivative of 2F1.
//
// Everything here is templated on the floating-point scalar and is a pure
// function of its arguments.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "unb/errors.hpp"

namespace unb {

/// Truncation policy shared by every infinite series.
struct SeriesControl {
  double rel_tol = 1e-14;
  double abs_tol = 1e-300;
  std::size_t max_terms = 100000;
};

inline void validate(const SeriesControl& ctrl) {
  if (!(ctrl.rel_tol > 0) || !(ctrl.abs_tol > 0) || ctrl.max_terms < 1) {
    throw DomainError("SeriesControl: tolerances must be positive and max_terms >= 1");
  }
}

/// A series sum kept as sign * exp(log_abs) so that very large or very small
/// values survive; `terms` is the number of terms consumed.
template <typename Scalar>
struct SeriesValue {
  Scalar log_abs = -std::numeric_limits<Scalar>::infinity();
  int sign = 0;
  std::size_t terms = 0;

  Scalar value() const { return sign == 0 ? Scalar(0) : Scalar(sign) * std::exp(log_abs); }
};

enum class Hyp2f1Method { automatic, direct, euler };

/// Parameters of the double series
///   sum_{m1,m2} (a1)_m1 (a2)_m2 (b1)_m1 / (c1)_m1
///             * (b2)_{m1+m2} (b3)_{m1+m2} / ((d1)_{m1+m2} (d2)_{m1+m2})
///             * x1^m1 / m1! * x2^m2 / m2!
template <typename Scalar>
struct ThetaArgs {
  Scalar a1, a2, b1, b2, b3, c1, d1, d2;
  Scalar x1, x2;
};

namespace detail {

template <typename Scalar>
bool is_nonpositive_integer(Scalar v) {
  return v <= 0 && v == std::floor(v);
}

template <typename Scalar>
int sign_of(Scalar v) {
  return (v > 0) - (v < 0);
}

/// Accumulates signed terms given in log form.
template <typename Scalar>
class ScaledSum {
 public:
  void add(Scalar log_abs, int sign) {
    if (sign == 0 || (std::isinf(log_abs) && log_abs < 0)) return;
    if (empty_) {
      log_scale_ = log_abs;
      mantissa_ = Scalar(sign);
      empty_ = false;
      return;
    }
    if (log_abs > log_scale_ + Scalar(300)) {
      mantissa_ *= std::exp(log_scale_ - log_abs);
      log_scale_ = log_abs;
    }
    mantissa_ += Scalar(sign) * std::exp(log_abs - log_scale_);
  }

  bool empty() const { return empty_ || mantissa_ == 0; }
  int sign() const { return empty_ ? 0 : sign_of(mantissa_); }
  Scalar log_abs() const {
    if (empty()) return -std::numeric_limits<Scalar>::infinity();
    return std::log(std::abs(mantissa_)) + log_scale_;
  }

 private:
  bool empty_ = true;
  Scalar log_scale_ = 0;
  Scalar mantissa_ = 0;
};

/// Sums 1 + t1 + t2 + ... with t_{n+1} = t_n * ratio(n). The running sum is
/// rescaled whenever it grows large, so the result is returned in log form.
template <typename Scalar, typename Ratio>
SeriesValue<Scalar> sum_ratio_series(Ratio&& ratio, const SeriesControl& ctrl, const char* name) {
  constexpr Scalar kBig = Scalar(1e150);
  const Scalar log_big = std::log(kBig);
  const Scalar log_abs_tol = std::log(Scalar(ctrl.abs_tol));

  Scalar term = 1;
  Scalar sum = 1;
  Scalar log_scale = 0;
  int quiet = 0;
  std::size_t n = 0;
  for (;;) {
    if (n + 1 >= ctrl.max_terms) {
      throw NonConvergenceError(std::string(name) + ": series did not converge within " +
                                    std::to_string(ctrl.max_terms) + " terms",
                                n + 1);
    }
    const Scalar rho = ratio(n);
    term *= rho;
    ++n;
    if (term == 0) break;
    sum += term;
    if (std::abs(term) > kBig || std::abs(sum) > kBig) {
      term /= kBig;
      sum /= kBig;
      log_scale += log_big;
    }
    const bool tiny_abs = std::log(std::abs(term)) + log_scale < log_abs_tol;
    const bool tiny_rel = std::abs(term) < Scalar(ctrl.rel_tol) * std::abs(sum);
    if (tiny_abs) break;
    // Two quiet terms in a row, and only once the terms are shrinking.
    if (tiny_rel && std::abs(rho) < 1) {
      if (++quiet >= 2) break;
    } else {
      quiet = 0;
    }
  }

  SeriesValue<Scalar> out;
  out.terms = n + 1;
  out.sign = sign_of(sum);
  out.log_abs = out.sign == 0 ? -std::numeric_limits<Scalar>::infinity()
                              : std::log(std::abs(sum)) + log_scale;
  return out;
}

template <typename Scalar>
void require_positive(Scalar x, const char* name) {
  if (!(x > 0)) throw DomainError(std::string(name) + ": argument must be positive");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gamma family

template <typename Scalar>
Scalar log_gamma(Scalar x) {
  detail::require_positive(x, "log_gamma");
  return std::lgamma(x);
}

template <typename Scalar>
Scalar digamma(Scalar x) {
  detail::require_positive(x, "digamma");
  Scalar result = 0;
  while (x < 10) {
    result -= 1 / x;
    x += 1;
  }
  const Scalar inv = 1 / x;
  const Scalar inv2 = inv * inv;
  // Asymptotic expansion with Bernoulli numbers B2..B12.
  const Scalar tail =
      inv2 * (Scalar(1) / 12 -
              inv2 * (Scalar(1) / 120 -
                      inv2 * (Scalar(1) / 252 -
                              inv2 * (Scalar(1) / 240 -
                                      inv2 * (Scalar(1) / 132 - inv2 * Scalar(691) / 32760)))));
  return result + std::log(x) - inv / 2 - tail;
}

template <typename Scalar>
Scalar trigamma(Scalar x) {
  detail::require_positive(x, "trigamma");
  Scalar result = 0;
  while (x < 10) {
    result += 1 / (x * x);
    x += 1;
  }
  const Scalar inv = 1 / x;
  const Scalar inv2 = inv * inv;
  const Scalar tail =
      inv * inv2 *
      (Scalar(1) / 6 -
       inv2 * (Scalar(1) / 30 -
               inv2 * (Scalar(1) / 42 -
                       inv2 * (Scalar(1) / 30 - inv2 * (Scalar(5) / 66 - inv2 * Scalar(691) / 2730)))));
  return result + inv + inv2 / 2 + tail;
}

// ---------------------------------------------------------------------------
// Hypergeometric series

namespace detail {

// The Euler transform F(a,b;c;z) = (1-z)^(c-a-b) F(c-a,c-b;c;z) pays off near
// z = 1 when its terms decay faster (a + b > c) and the new numerator
// parameters stay positive, so no sign changes enter the sum.
template <typename Scalar>
bool euler_preferred(Scalar a, Scalar b, Scalar c, Scalar z) {
  return z > Scalar(0.75) && a + b > c && c - a > 0 && c - b > 0;
}

template <typename Scalar>
SeriesValue<Scalar> direct_2f1(Scalar a, Scalar b, Scalar c, Scalar z, const SeriesControl& ctrl) {
  if (z == 0) return {Scalar(0), 1, 1};
  return sum_ratio_series<Scalar>(
      [&](std::size_t n) {
        const Scalar k = Scalar(n);
        return (a + k) * (b + k) / ((c + k) * (k + 1)) * z;
      },
      ctrl, "gauss_2f1");
}

}  // namespace detail

/// Gauss hypergeometric function 2F1(a, b; c; z) for |z| < 1, in log form.
template <typename Scalar>
SeriesValue<Scalar> gauss_2f1_log(Scalar a, Scalar b, Scalar c, Scalar z,
                                  const SeriesControl& ctrl = {},
                                  Hyp2f1Method method = Hyp2f1Method::automatic) {
  validate(ctrl);
  if (!(std::abs(z) < 1)) throw DomainError("gauss_2f1: requires |z| < 1");
  if (detail::is_nonpositive_integer(c)) {
    throw DomainError("gauss_2f1: c must not be a non-positive integer");
  }
  const bool euler = method == Hyp2f1Method::euler ||
                     (method == Hyp2f1Method::automatic && detail::euler_preferred(a, b, c, z));
  if (!euler) return detail::direct_2f1(a, b, c, z, ctrl);

  auto out = detail::direct_2f1(c - a, c - b, c, z, ctrl);
  out.log_abs += (c - a - b) * std::log1p(-z);
  return out;
}

template <typename Scalar>
Scalar gauss_2f1(Scalar a, Scalar b, Scalar c, Scalar z, const SeriesControl& ctrl = {},
                 Hyp2f1Method method = Hyp2f1Method::automatic) {
  return gauss_2f1_log(a, b, c, z, ctrl, method).value();
}

/// Kummer confluent hypergeometric function 1F1(a; c; z), in log form.
template <typename Scalar>
SeriesValue<Scalar> confluent_1f1_log(Scalar a, Scalar c, Scalar z, const SeriesControl& ctrl = {}) {
  validate(ctrl);
  if (detail::is_nonpositive_integer(c)) {
    throw DomainError("confluent_1f1: c must not be a non-positive integer");
  }
  if (z == 0) return {Scalar(0), 1, 1};
  return detail::sum_ratio_series<Scalar>(
      [&](std::size_t n) {
        const Scalar k = Scalar(n);
        return (a + k) / ((c + k) * (k + 1)) * z;
      },
      ctrl, "confluent_1f1");
}

template <typename Scalar>
Scalar confluent_1f1(Scalar a, Scalar c, Scalar z, const SeriesControl& ctrl = {}) {
  return confluent_1f1_log(a, c, z, ctrl).value();
}

/// Hurwitz-Lerch transcendent at s = 1: sum_k z^k / (k + a).
template <typename Scalar>
SeriesValue<Scalar> lerch_phi_log(Scalar z, Scalar a, const SeriesControl& ctrl = {}) {
  validate(ctrl);
  if (!(std::abs(z) < 1)) throw DomainError("lerch_phi: requires |z| < 1");
  detail::require_positive(a, "lerch_phi");
  SeriesValue<Scalar> out{Scalar(0), 1, 1};
  if (z != 0) {
    out = detail::sum_ratio_series<Scalar>(
        [&](std::size_t n) {
          const Scalar k = Scalar(n);
          return z * (k + a) / (k + 1 + a);
        },
        ctrl, "lerch_phi");
  }
  out.log_abs -= std::log(a);
  return out;
}

template <typename Scalar>
Scalar lerch_phi(Scalar z, Scalar a, const SeriesControl& ctrl = {}) {
  return lerch_phi_log(z, a, ctrl).value();
}

/// Largest anti-diagonal index summed by kampe_theta1 before giving up.
inline constexpr std::size_t kThetaMaxDiagonal = 4096;

/// The Kampe de Feriet-like double series (see ThetaArgs). Summed one
/// anti-diagonal m1 + m2 = N at a time until two consecutive diagonals fall
/// below rel_tol of the running sum. `terms` counts grid points visited.
template <typename Scalar>
SeriesValue<Scalar> kampe_theta1_log(const ThetaArgs<Scalar>& t, const SeriesControl& ctrl = {}) {
  validate(ctrl);
  using detail::is_nonpositive_integer;
  if (is_nonpositive_integer(t.c1) || is_nonpositive_integer(t.d1) ||
      is_nonpositive_integer(t.d2)) {
    throw DomainError("kampe_theta1: c1, d1, d2 must not be non-positive integers");
  }
  if (!(std::abs(t.x1) < 1) || !(std::abs(t.x2) < 1)) {
    throw DomainError("kampe_theta1: requires |x1| < 1 and |x2| < 1");
  }

  static constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  // Single-index factors in log form with separate signs.
  std::vector<Scalar> log_a{0}, log_b{0};
  std::vector<int> sign_a{1}, sign_b{1};
  Scalar log_c = 0;
  int sign_c = 1;

  auto extend = [](std::vector<Scalar>& logs, std::vector<int>& signs, Scalar ratio) {
    const int prev = signs.back();
    if (prev == 0 || ratio == 0) {
      logs.push_back(kNegInf);
      signs.push_back(0);
    } else {
      logs.push_back(logs.back() + std::log(std::abs(ratio)));
      signs.push_back(prev * detail::sign_of(ratio));
    }
  };

  detail::ScaledSum<Scalar> total;
  int quiet = 0;
  std::size_t terms = 0;
  for (std::size_t diag = 0;; ++diag) {
    if (diag > kThetaMaxDiagonal) {
      throw NonConvergenceError("kampe_theta1: anti-diagonal cap reached", terms);
    }
    if (diag > 0) {
      const Scalar k = Scalar(diag - 1);
      extend(log_a, sign_a, (t.a1 + k) * (t.b1 + k) / ((t.c1 + k) * (k + 1)) * t.x1);
      extend(log_b, sign_b, (t.a2 + k) / (k + 1) * t.x2);
      const Scalar rc = (t.b2 + k) * (t.b3 + k) / ((t.d1 + k) * (t.d2 + k));
      if (sign_c != 0 && rc != 0) {
        log_c += std::log(std::abs(rc));
        sign_c *= detail::sign_of(rc);
      } else {
        sign_c = 0;
      }
    }

    detail::ScaledSum<Scalar> diagonal;
    if (sign_c != 0) {
      for (std::size_t m1 = 0; m1 <= diag; ++m1) {
        const std::size_t m2 = diag - m1;
        const int s = sign_a[m1] * sign_b[m2];
        if (s != 0) diagonal.add(log_c + log_a[m1] + log_b[m2], s * sign_c);
      }
    }
    terms += diag + 1;
    total.add(diagonal.log_abs(), diagonal.sign());

    const bool negligible =
        diagonal.empty() ||
        (!total.empty() &&
         diagonal.log_abs() < std::log(Scalar(ctrl.rel_tol)) + total.log_abs());
    if (negligible) {
      if (++quiet >= 2) break;
    } else {
      quiet = 0;
    }
  }

  SeriesValue<Scalar> out;
  out.terms = terms;
  out.sign = total.sign();
  out.log_abs = total.log_abs();
  return out;
}

template <typename Scalar>
Scalar kampe_theta1(const ThetaArgs<Scalar>& t, const SeriesControl& ctrl = {}) {
  return kampe_theta1_log(t, ctrl).value();
}

/// d/db 2F1(a, b; c; z) through the double series:
///   (z a / c) * Theta(1, 1 | b, b+1, a+1 ; b+1 | 2, c+1 ; z, z).
template <typename Scalar>
Scalar gauss_2f1_db(Scalar a, Scalar b, Scalar c, Scalar z, const SeriesControl& ctrl = {}) {
  const ThetaArgs<Scalar> args{1, 1, b, b + 1, a + 1, b + 1, 2, c + 1, z, z};
  return z * a / c * kampe_theta1(args, ctrl);
}

}  // namespace unb
