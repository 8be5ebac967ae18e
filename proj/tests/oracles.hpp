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

// Test-only reference computations. Nothing here calls into the library's
// numerical routines, so agreement with them is an independent check.

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace sawsphere::oracle {

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr long double kKronrodNodes[8] = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.000000000000000000000000000000000L};
inline constexpr long double kKronrodWeights[8] = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
inline constexpr long double kGaussWeights[4] = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

struct Segment {
  long double value;
  long double error;
};

inline Segment gk15(const std::function<long double(long double)>& f, long double a,
                    long double b) {
  const long double center = 0.5L * (a + b);
  const long double half = 0.5L * (b - a);
  const long double fc = f(center);
  long double kronrod = fc * kKronrodWeights[7];
  long double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const long double dx = half * kKronrodNodes[j];
    const long double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  return {kronrod * half, std::fabs((kronrod - gauss) * half)};
}

inline long double adaptive(const std::function<long double(long double)>& f, long double a,
                            long double b, long double tol, int depth) {
  const Segment whole = gk15(f, a, b);
  const long double mid = 0.5L * (a + b);
  const Segment left = gk15(f, a, mid);
  const Segment right = gk15(f, mid, b);
  const long double refined = left.value + right.value;
  if (depth <= 0 || std::fabs(refined - whole.value) <= tol * std::fabs(refined) ||
      std::fabs(refined - whole.value) < 1e-300L) {
    return refined;
  }
  return adaptive(f, a, mid, tol, depth - 1) + adaptive(f, mid, b, tol, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod quadrature of f over [a, b] in long double.
inline long double integrate(const std::function<long double(long double)>& f, long double a,
                             long double b, long double tol = 1e-14L) {
  // Split into unit-ish panels so narrow peaks are never missed by the first
  // Kronrod sample.
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.5L)));
  long double total = 0.0L;
  const long double step = (b - a) / panels;
  for (int i = 0; i < panels; ++i) {
    total += detail::adaptive(f, a + i * step, a + (i + 1) * step, tol, 30);
  }
  return total;
}

/// I_d(alpha) by quadrature of its defining integral.
inline double i_d_quadrature(int d, double alpha) {
  const long double a = alpha;
  const long double peak = 0.5L * (a + std::sqrt(a * a + 4.0L * (d - 1)));
  const long double upper = std::max(peak, 0.0L) + 40.0L;
  auto f = [&](long double r) {
    if (r == 0.0L) return d == 1 ? std::exp(-0.5L * a * a) : 0.0L;
    return std::exp((d - 1) * std::log(r) - 0.5L * (r - a) * (r - a));
  };
  return static_cast<double>(integrate(f, 0.0L, upper) /
                             std::sqrt(2.0L * std::numbers::pi_v<long double>));
}

/// \int_0^\infty x^{nu-1} exp(-x^2/2 - g x) dx by quadrature.
inline double gr3462_quadrature(double nu, double g) {
  const long double gl = g;
  const long double peak = 0.5L * (-gl + std::sqrt(gl * gl + 4.0L * std::max(nu - 1.0, 0.0)));
  const long double upper = std::max(peak, 0.0L) + 40.0L;
  if (nu < 1.0) {
    // x = y^2 removes the integrable singularity at the origin.
    auto f = [&](long double y) {
      if (y == 0.0L) return nu == 0.5 ? 2.0L : 0.0L;
      const long double x = y * y;
      return 2.0L * std::exp((2.0L * nu - 1.0L) * std::log(y) - 0.5L * x * x - gl * x);
    };
    return static_cast<double>(integrate(f, 0.0L, std::sqrt(upper)));
  }
  auto f = [&](long double x) {
    if (x == 0.0L) return nu == 1.0 ? 1.0L : 0.0L;
    return std::exp((nu - 1.0L) * std::log(x) - 0.5L * x * x - gl * x);
  };
  return static_cast<double>(integrate(f, 0.0L, upper));
}

/// Upper tail probability of a chi-square statistic with `dof` degrees of freedom.
inline double chi_square_pvalue(double statistic, double dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

/// Pearson chi-square statistic for observed counts against expected counts.
inline double chi_square_statistic(const std::vector<double>& observed,
                                   const std::vector<double>& expected) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double diff = observed[i] - expected[i];
    chi2 += diff * diff / expected[i];
  }
  return chi2;
}

}  // namespace sawsphere::oracle
