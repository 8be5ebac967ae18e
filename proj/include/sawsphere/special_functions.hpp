// Copyright 2026 The sawsphere Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scalar special functions behind the projected-normal density.
//
// The central quantity is the Gaussian moment integral
//
//     M(nu, s) = \int_0^\infty r^{nu-1} exp(-r^2/2 + s r) dr,
//
// from which the I_d family, the parabolic cylinder function D_{-nu} and the
// angular Gaussian kernel all follow:
//
//     I_d(a)     = exp(-a^2/2) M(d, a) / sqrt(2 pi)
//     D_{-nu}(z) = exp(-z^2/4) M(nu, -z) / Gamma(nu)
//
// I_d is evaluated by its three-term recurrence, M by a power series in s
// (or, where that series cancels, by an exponentially convergent trapezoid
// rule in log r), so the two routes are numerically independent.
//
// Everything here is a pure function and may be called from any thread.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "sawsphere/errors.hpp"

namespace sawsphere {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLogPi = 1.14472988584940017414;
inline constexpr double kLog2Pi = 1.83787706640934548356;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Streaming log-sum-exp of positive terms given by their logarithms.
class LogAccumulator {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > scale_) {
      acc_ = acc_ * std::exp(scale_ - log_term) + 1.0;
      scale_ = log_term;
    } else {
      acc_ += std::exp(log_term - scale_);
    }
  }
  [[nodiscard]] double log() const {
    return acc_ == 0.0 ? -std::numeric_limits<double>::infinity()
                       : scale_ + std::log(acc_);
  }
  [[nodiscard]] bool empty() const { return acc_ == 0.0; }

 private:
  double scale_ = -std::numeric_limits<double>::infinity();
  double acc_ = 0.0;
};

/// ln Gamma(x) for x > 0.
///
/// Lanczos approximation with g = 671/128 and 14 coefficients (the
/// Godfrey set). Relative error is below 2e-15 on [0.5, 200] except close to
/// the roots x = 1 and x = 2, where the absolute error stays below 1e-15.
/// Arguments below 0.5 go through the reflection formula.
inline double gamma_ln(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("gamma_ln: argument must be positive and finite, got " +
                      std::to_string(x));
  }
  if (x < 0.5) {
    return std::log(kPi / std::sin(kPi * x)) - gamma_ln(1.0 - x);
  }
  static constexpr double kCoefficients[14] = {
      57.1562356658629235,     -59.5979603554754912,
      14.1360979747417471,     -0.491913816097620199,
      .339946499848118887e-4,  .465236289270485756e-4,
      -.983744753048795646e-4, .158088703224912494e-3,
      -.210264441724104883e-3, .217439618115212643e-3,
      -.164318106536763890e-3, .844182239838527433e-4,
      -.261908384015814087e-4, .368991826595316234e-5};
  double y = x;
  double tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double series = 0.999999999999997092;
  for (double c : kCoefficients) series += c / ++y;
  return tmp + std::log(2.5066282746310005 * series / x);
}

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

/// log Phi(x), accurate in the far left tail where Phi underflows.
inline double log_std_normal_cdf(double x) {
  if (x > -20.0) return std::log(std_normal_cdf(x));
  // Mills ratio Phi(-t)/phi(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
  const double t = -x;
  double v = t;
  for (int k = 200; k >= 1; --k) v = t + k / v;
  return -0.5 * x * x - kLogSqrt2Pi - std::log(v);
}

// ---------------------------------------------------------------------------
// I_d(alpha) = (2 pi)^{-1/2} \int_0^\infty r^{d-1} exp(-(r - alpha)^2 / 2) dr
// ---------------------------------------------------------------------------

/// I_1 ... I_d evaluated at one alpha.
struct IdSequence {
  double alpha = 0.0;
  std::vector<double> values;  ///< values[k - 1] = I_k(alpha)

  [[nodiscard]] double operator[](int d) const { return values.at(d - 1); }
};

namespace detail {

// Rescaling threshold for the recurrences; keeps values in range for d up to
// several thousand. The accumulated shift is carried in log space.
inline constexpr double kBig = 1e150;
inline constexpr double kSmall = 1e-150;

// Forward recurrence I_k = a I_{k-1} + (k-2) I_{k-2} from I_1 = Phi(a),
// I_2 = phi(a) + a Phi(a). Stable for a >= 0 where I_k is the dominant
// solution. For a < 0 the alternating companion solution dominates and the
// error grows like exp(2 |a| sqrt(d)), so this is only used while that
// factor is small.
inline std::vector<double> log_id_forward(int d, double a) {
  std::vector<double> logs(static_cast<std::size_t>(d));
  const double phi_a = std_normal_cdf(a);
  double prev = phi_a;                            // I_{k-2}
  double cur = std_normal_pdf(a) + a * phi_a;     // I_{k-1}
  double shift = 0.0;
  logs[0] = log_std_normal_cdf(a);
  if (d >= 2) logs[1] = std::log(cur);
  for (int k = 3; k <= d; ++k) {
    const double next = a * cur + (k - 2) * prev;
    prev = cur;
    cur = next;
    if (cur > kBig) {
      prev /= kBig;
      cur /= kBig;
      shift += std::log(kBig);
    }
    logs[static_cast<std::size_t>(k - 1)] = std::log(cur) + shift;
  }
  return logs;
}

// Miller's backward recurrence for a < 0, where I_k is the minimal solution.
// Starting far above d with arbitrary seeds, the downward recurrence
// I_{k-2} = (I_k - a I_{k-1}) / (k - 2) converges to a multiple of I_k; the
// multiple is fixed by I_1 = Phi(a). The dominant/minimal ratio grows like
// exp(2 |a| (sqrt(N) - sqrt(d))), so N = (sqrt(d) + 20/|a|)^2 gives ~17
// digits.
inline std::vector<double> log_id_backward(int d, double a) {
  const double root = std::sqrt(static_cast<double>(d)) + 20.0 / std::abs(a);
  const long start = static_cast<long>(root * root) + 10;
  std::vector<double> rel(static_cast<std::size_t>(d));  // log y_k
  double upper = 0.0;  // y_{k}
  double lower = 1.0;  // y_{k-1}
  double shift = 0.0;  // log of accumulated rescaling
  for (long k = start + 1; k >= 3; --k) {
    const double next = (upper - a * lower) / static_cast<double>(k - 2);
    upper = lower;
    lower = next;  // y_{k-2}
    if (std::abs(lower) > kBig) {
      upper /= kBig;
      lower /= kBig;
      shift += std::log(kBig);
    } else if (std::abs(lower) < kSmall) {
      upper /= kSmall;
      lower /= kSmall;
      shift += std::log(kSmall);
    }
    const long index = k - 2;
    if (index <= d) rel[static_cast<std::size_t>(index - 1)] = std::log(lower) + shift;
  }
  const double log_i1 = log_std_normal_cdf(a);
  const double offset = log_i1 - rel[0];
  std::vector<double> logs(rel.size());
  for (std::size_t k = 0; k < rel.size(); ++k) logs[k] = rel[k] + offset;
  logs[0] = log_i1;
  return logs;
}

inline std::vector<double> log_id_all(int d, double alpha) {
  if (d < 1) throw DomainError("i_d: d must be >= 1, got " + std::to_string(d));
  if (!std::isfinite(alpha)) throw DomainError("i_d: alpha must be finite");
  if (alpha >= 0.0 || std::abs(alpha) * std::sqrt(static_cast<double>(d)) <= 3.0) {
    return log_id_forward(d, alpha);
  }
  return log_id_backward(d, alpha);
}

}  // namespace detail

/// log I_d(alpha). Safe for large d where I_d itself overflows.
inline double log_i_d(int d, double alpha) { return detail::log_id_all(d, alpha).back(); }

/// I_d(alpha) by the three-term recurrence seeded with Phi and phi.
inline double i_d(int d, double alpha) { return std::exp(log_i_d(d, alpha)); }

inline IdSequence id_sequence(int d, double alpha) {
  IdSequence seq{alpha, detail::log_id_all(d, alpha)};
  for (double& v : seq.values) v = std::exp(v);
  return seq;
}

// ---------------------------------------------------------------------------
// Gaussian moment integral M(nu, s)
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kMaxSeriesTerms = 10000;

struct MomentSeries {
  double log_even = 0.0;  ///< log of the even-power sum (term 0 normalized to 1)
  double log_odd = -std::numeric_limits<double>::infinity();  ///< log |odd sum|
};

// Both parity sums of M(nu, s) / (2^{nu/2-1} Gamma(nu/2)) are positive-term
// series in s^2; the odd one carries the sign of s.
inline MomentSeries moment_series(double nu, double s, double tol) {
  MomentSeries out;
  const double log_tol = std::log(tol);
  const double s2 = s * s;
  auto run = [&](double log_first, int parity) {
    LogAccumulator acc;
    double log_term = log_first;
    acc.add(log_term);
    if (s2 == 0.0) return acc.log();
    for (int m = 1;; ++m) {
      if (m > kMaxSeriesTerms) {
        throw ConvergenceError("moment series did not converge within " +
                               std::to_string(kMaxSeriesTerms) + " terms");
      }
      const double k = 2.0 * m + parity;  // power of the new term
      const double ratio = s2 * (nu + k - 2.0) / (k * (k - 1.0));
      log_term += std::log(ratio);
      acc.add(log_term);
      // Past the peak the tail is bounded by term * ratio / (1 - ratio).
      if (ratio < 0.5 && log_term - acc.log() < log_tol) break;
    }
    return acc.log();
  };
  out.log_even = run(0.0, 0);
  if (s != 0.0) {
    const double log_first = std::log(std::abs(s)) + 0.5 * std::numbers::ln2 +
                             gamma_ln(0.5 * (nu + 1.0)) - gamma_ln(0.5 * nu);
    out.log_odd = run(log_first, 1);
  }
  return out;
}

// Trapezoid rule in x = log r for exp(nu x - e^{2x}/2 + s e^x). The integrand
// is analytic in a strip around the real axis and decays at both ends, so the
// rule converges geometrically in 1/h. The step is a fraction of the Laplace
// width at the peak r* = (s + sqrt(s^2 + 4 nu)) / 2.
inline double log_moment_quadrature(double nu, double s) {
  const double peak_r = 0.5 * (s + std::sqrt(s * s + 4.0 * nu));
  const double x0 = std::log(peak_r);
  const double width = 1.0 / std::sqrt(peak_r * peak_r + nu);
  const double h = width / 6.0;
  auto log_f = [&](double x) {
    const double r = std::exp(x);
    return nu * x - 0.5 * r * r + s * r;
  };
  const double peak = log_f(x0);
  double total = 1.0;
  constexpr long kMaxNodes = 10'000'000;
  for (int direction : {1, -1}) {
    for (long k = 1; k < kMaxNodes; ++k) {
      const double rel = log_f(x0 + direction * k * h) - peak;
      total += std::exp(rel);
      if (rel < -45.0) break;
    }
  }
  return peak + std::log(total * h);
}

}  // namespace detail

/// log of M(nu, s) = \int_0^\infty r^{nu-1} exp(-r^2/2 + s r) dr, nu > 0.
///
/// Power series for s >= 0 and for mildly negative s; once the even and odd
/// parts cancel by more than a factor of two the trapezoid rule in log r
/// takes over. For s < 0 the series is always summed to full precision, since
/// `tol` is relative to the parts and not to their difference.
inline double log_gauss_moment(double nu, double s, double tol = 1e-15) {
  if (!(nu > 0.0)) throw DomainError("log_gauss_moment: nu must be positive");
  if (!std::isfinite(s)) throw DomainError("log_gauss_moment: s must be finite");
  const double log_c0 = (0.5 * nu - 1.0) * std::numbers::ln2 + gamma_ln(0.5 * nu);
  const auto parts = detail::moment_series(nu, s, s < 0.0 ? std::min(tol, 1e-17) : tol);
  if (s >= 0.0) {
    LogAccumulator acc;
    acc.add(parts.log_even);
    acc.add(parts.log_odd);
    return log_c0 + acc.log();
  }
  const double q = std::exp(parts.log_odd - parts.log_even);
  if (q <= 0.5) return log_c0 + parts.log_even + std::log1p(-q);
  return detail::log_moment_quadrature(nu, s);
}

/// log D_{-nu}(z) for nu > 0.
inline double log_parabolic_cylinder_neg(double nu, double z) {
  if (!(nu > 0.0)) {
    throw DomainError("parabolic_cylinder_neg: nu must be positive, got " +
                      std::to_string(nu));
  }
  if (!std::isfinite(z)) throw DomainError("parabolic_cylinder_neg: z must be finite");
  return -0.25 * z * z - gamma_ln(nu) + log_gauss_moment(nu, -z);
}

/// Parabolic cylinder function D_{-nu}(z), nu > 0.
inline double parabolic_cylinder_neg(double nu, double z) {
  return std::exp(log_parabolic_cylinder_neg(nu, z));
}

// ---------------------------------------------------------------------------
// Saw series S_d(g) = sum_k (sqrt2 g)^k Gamma((d+k)/2) / (k! Gamma(d/2))
// ---------------------------------------------------------------------------

namespace detail {

// Summed in Real arithmetic. Returns nullopt when cancellation between the
// even and odd parts leaves fewer than 18 reliable digits at this precision.
template <class Real>
std::optional<double> log_saw_series_fixed(int d, double g) {
  using std::abs;
  using std::log;
  using std::sqrt;
  const int digits = std::numeric_limits<Real>::digits10;
  const Real gg = Real(g);
  const Real g2 = gg * gg;
  // Truncate at working precision: the final sum can be far smaller than
  // either half, so a tolerance relative to the halves is not enough.
  const Real rtol = std::numeric_limits<Real>::epsilon();

  // Gamma((d+1)/2) / Gamma(d/2) exactly, by the step r(d+2) = r(d) (d+1)/d.
  const Real pi = boost::math::constants::pi<Real>();
  Real gamma_ratio = (d % 2 == 1) ? Real(1) / sqrt(pi) : sqrt(pi) / Real(2);
  for (int k = (d % 2 == 1) ? 1 : 2; k < d; k += 2) {
    gamma_ratio *= Real(k + 1) / Real(k);
  }

  auto run = [&](Real first, int parity) {
    Real sum = first;
    Real term = first;
    if (g == 0.0) return sum;
    for (int m = 1;; ++m) {
      if (m > kMaxSeriesTerms) {
        throw ConvergenceError("saw series did not converge within " +
                               std::to_string(kMaxSeriesTerms) + " terms");
      }
      const int k = 2 * m + parity;
      const Real ratio = g2 * Real(d + k - 2) / Real(k * (k - 1));
      term *= ratio;
      sum += term;
      if (ratio < Real(0.5) && abs(term) < rtol * abs(sum)) break;
    }
    return sum;
  };
  const Real even = run(Real(1), 0);
  const Real odd = g == 0.0 ? Real(0) : run(sqrt(Real(2)) * gg * gamma_ratio, 1);
  const Real total = even + odd;
  if (!(total > Real(0))) return std::nullopt;
  const Real amplification = (even + abs(odd)) / total;
  if (static_cast<double>(log(amplification) / log(Real(10))) > digits - 18) {
    return std::nullopt;
  }
  return static_cast<double>(log(total));
}

}  // namespace detail

/// log of the Saw series sum_k (sqrt2 g)^k Gamma((d+k)/2) / (k! Gamma(d/2)).
///
/// For g < 0 the alternating parts cancel strongly; the sum is redone at
/// 50, 120 and 300 significant digits until enough digits survive.
inline double log_saw_series(int d, double g, double tol = 1e-15) {
  if (d < 1) throw DomainError("log_saw_series: d must be >= 1");
  if (!std::isfinite(g)) throw DomainError("log_saw_series: argument must be finite");
  namespace mp = boost::multiprecision;
  if (g >= 0.0) {
    // No cancellation; double precision suffices.
    const double log_c0 = (0.5 * d - 1.0) * std::numbers::ln2 + gamma_ln(0.5 * d);
    return log_gauss_moment(d, g, tol) - log_c0;
  }
  if (auto v = detail::log_saw_series_fixed<mp::cpp_bin_float_50>(d, g)) return *v;
  using Float120 = mp::number<mp::cpp_bin_float<120>>;
  if (auto v = detail::log_saw_series_fixed<Float120>(d, g)) return *v;
  using Float300 = mp::number<mp::cpp_bin_float<300>>;
  if (auto v = detail::log_saw_series_fixed<Float300>(d, g)) return *v;
  throw ConvergenceError("log_saw_series: cancellation exceeds 300-digit arithmetic");
}

}  // namespace sawsphere
