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

// Numerical self-checks of the sphere densities: agreement of the three
// projected-normal forms, normalization on S^1 and S^2, and a binned
// chi-square test of the sampler. Used by `sawsphere density-check` and the
// acceptance suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "sawsphere/sphere.hpp"
#include "sawsphere/stats.hpp"

namespace sawsphere {

/// Symmetric positive-definite matrix Q diag(eig) Q^T with a Haar-random
/// rotation Q and eigenvalues uniform in [eig_lo, eig_hi].
template <class Generator>
Eigen::MatrixXd random_spd(int d, double eig_lo, double eig_hi, Generator& gen) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(eig_lo, eig_hi);
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = normal(gen);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes Q Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Eigen::VectorXd eig(d);
  for (int i = 0; i < d; ++i) eig(i) = unif(gen);
  Eigen::MatrixXd s = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

/// Random rotation matrix (orthogonal, determinant +1).
template <class Generator>
Eigen::MatrixXd random_rotation(int d, Generator& gen) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = normal(gen);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

template <class Generator>
UnitVector random_unit_vector(int d, Generator& gen) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = normal(gen);
  } while (v.norm() == 0.0);
  return UnitVector::normalized(v);
}

/// Mean vector with uniform direction and norm uniform in [0, max_norm].
template <class Generator>
Eigen::VectorXd random_mean(int d, double max_norm, Generator& gen) {
  std::uniform_real_distribution<double> unif(0.0, max_norm);
  return random_unit_vector(d, gen).coords() * unif(gen);
}

/// Trapezoid rule over S^1 with `nodes` equispaced angles.
inline double integrate_circle(const std::function<double(const UnitVector&)>& density,
                               int nodes) {
  double total = 0.0;
  const double h = 2.0 * kPi / nodes;
  Eigen::VectorXd u(2);
  for (int i = 0; i < nodes; ++i) {
    const double theta = i * h;
    u << std::cos(theta), std::sin(theta);
    total += density(UnitVector::normalized(u));
  }
  return total * h;
}

/// Stratified Monte Carlo over S^2: one jittered point in each of
/// side x side equal-area cells of (cos theta, phi).
inline double integrate_sphere_stratified(const std::function<double(const UnitVector&)>& density,
                                          int side, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double total = 0.0;
  Eigen::VectorXd u(3);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double z = -1.0 + 2.0 * (i + unif(gen)) / side;
      const double phi = 2.0 * kPi * (j + unif(gen)) / side;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      u << rho * std::cos(phi), rho * std::sin(phi), z;
      total += density(UnitVector::normalized(u));
    }
  }
  return 4.0 * kPi * total / (static_cast<double>(side) * side);
}

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double pvalue = 0.0;
  double expected_mass = 0.0;  ///< total probability over the bins, ideally 1
};

/// Chi-square goodness of fit of samples on S^2 against a density, binned on
/// an equal-area (cos theta, phi) grid. Expected bin masses come from a
/// 7x7-point Gauss-Legendre rule per cell.
inline ChiSquareResult sphere_chi_square(const std::vector<UnitVector>& samples,
                                         const std::function<double(const UnitVector&)>& density,
                                         int z_bins, int phi_bins) {
  const int bins = z_bins * phi_bins;
  std::vector<double> observed(bins, 0.0);
  for (const auto& s : samples) {
    if (s.dim() != 3) throw ShapeError("sphere_chi_square: samples must lie on S^2");
    const double z = std::clamp(s(2), -1.0, 1.0);
    double phi = std::atan2(s(1), s(0));
    if (phi < 0) phi += 2.0 * kPi;
    const int iz = std::min(z_bins - 1, static_cast<int>((z + 1.0) / 2.0 * z_bins));
    const int ip = std::min(phi_bins - 1, static_cast<int>(phi / (2.0 * kPi) * phi_bins));
    observed[iz * phi_bins + ip] += 1.0;
  }
  using Rule = boost::math::quadrature::gauss<double, 7>;
  ChiSquareResult out;
  const double n = static_cast<double>(samples.size());
  Eigen::VectorXd u(3);
  for (int iz = 0; iz < z_bins; ++iz) {
    const double z0 = -1.0 + 2.0 * iz / z_bins;
    const double z1 = -1.0 + 2.0 * (iz + 1) / z_bins;
    for (int ip = 0; ip < phi_bins; ++ip) {
      const double p0 = 2.0 * kPi * ip / phi_bins;
      const double p1 = 2.0 * kPi * (ip + 1) / phi_bins;
      const double mass = Rule::integrate(
          [&](double z) {
            return Rule::integrate(
                [&](double phi) {
                  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                  u << rho * std::cos(phi), rho * std::sin(phi), z;
                  return density(UnitVector::normalized(u));
                },
                p0, p1);
          },
          z0, z1);
      out.expected_mass += mass;
      const double expected = n * mass;
      const double diff = observed[iz * phi_bins + ip] - expected;
      out.statistic += diff * diff / expected;
    }
  }
  out.dof = bins - 1;
  out.pvalue = chi_square_pvalue(out.statistic, out.dof);
  return out;
}

/// Relative disagreement of two log-density values. Values near zero are
/// compared absolutely, since a relative error of a vanishing log is
/// meaningless.
inline double log_relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

struct TrifectaReport {
  int cases = 0;
  double max_recursive_vs_closed = 0.0;
  double max_series_vs_closed = 0.0;
  double max_recursive_vs_series = 0.0;
  [[nodiscard]] double max_error() const {
    return std::max({max_recursive_vs_closed, max_series_vs_closed, max_recursive_vs_series});
  }
};

/// Agreement of the three projected-normal forms on random (u, mu, Sigma):
/// eigenvalues of Sigma in [0.2, 5], |mu| <= 4.
inline TrifectaReport trifecta_check(const std::vector<int>& dims, int per_dim,
                                     std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  TrifectaReport rep;
  for (int d : dims) {
    for (int k = 0; k < per_dim; ++k) {
      const ProjectedNormalParams p(random_mean(d, 4.0, gen), random_spd(d, 0.2, 5.0, gen));
      const UnitVector u = random_unit_vector(d, gen);
      const double rec = projected_normal_logpdf_recursive(u, p);
      const double ser = projected_normal_logpdf_series(u, p);
      const double clo = projected_normal_logpdf_closed(u, p);
      rep.max_recursive_vs_closed = std::max(rep.max_recursive_vs_closed, log_relative_error(rec, clo));
      rep.max_series_vs_closed = std::max(rep.max_series_vs_closed, log_relative_error(ser, clo));
      rep.max_recursive_vs_series = std::max(rep.max_recursive_vs_series, log_relative_error(rec, ser));
      ++rep.cases;
    }
  }
  return rep;
}

struct NormalizationReport {
  std::vector<double> circle_integrals;
  std::vector<double> sphere_integrals;
  [[nodiscard]] double max_circle_error() const {
    double e = 0.0;
    for (double v : circle_integrals) e = std::max(e, std::abs(v - 1.0));
    return e;
  }
  [[nodiscard]] double max_sphere_error() const {
    double e = 0.0;
    for (double v : sphere_integrals) e = std::max(e, std::abs(v - 1.0));
    return e;
  }
};

/// Integral of the isotropic AGD density over S^1 (trapezoid, 10^5 nodes)
/// and S^2 (stratified, side^2 points) for random (mu, kappa).
inline NormalizationReport agd_normalization_check(int sets, std::uint64_t seed,
                                                   int circle_nodes = 100000,
                                                   int sphere_side = 1000) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> kappa_dist(0.2, 4.0);
  NormalizationReport rep;
  for (int k = 0; k < sets; ++k) {
    const IsotropicSawParams p2(random_unit_vector(2, gen), kappa_dist(gen));
    rep.circle_integrals.push_back(integrate_circle(
        [&](const UnitVector& u) { return std::exp(agd_logpdf(u, p2)); }, circle_nodes));
    const IsotropicSawParams p3(random_unit_vector(3, gen), kappa_dist(gen));
    rep.sphere_integrals.push_back(integrate_sphere_stratified(
        [&](const UnitVector& u) { return std::exp(agd_logpdf(u, p3)); }, sphere_side, gen()));
  }
  return rep;
}

/// Same integrals for the general projected normal in one of its forms.
inline NormalizationReport projected_normal_normalization_check(
    int sets, std::uint64_t seed, Convention convention = Convention::derived,
    int circle_nodes = 100000, int sphere_side = 1000) {
  std::mt19937_64 gen(seed);
  NormalizationReport rep;
  for (int k = 0; k < sets; ++k) {
    const ProjectedNormalParams p2(random_mean(2, 3.0, gen), random_spd(2, 0.3, 3.0, gen));
    rep.circle_integrals.push_back(integrate_circle(
        [&](const UnitVector& u) {
          return std::exp(projected_normal_logpdf_recursive(u, p2, convention));
        },
        circle_nodes));
    const ProjectedNormalParams p3(random_mean(3, 3.0, gen), random_spd(3, 0.3, 3.0, gen));
    rep.sphere_integrals.push_back(integrate_sphere_stratified(
        [&](const UnitVector& u) {
          return std::exp(projected_normal_logpdf_recursive(u, p3, convention));
        },
        sphere_side, gen()));
  }
  return rep;
}

/// Sampler fidelity: n draws in d = 3 against the analytic density.
inline ChiSquareResult sampler_chi_square_check(std::size_t n, std::uint64_t seed,
                                                int z_bins = 20, int phi_bins = 20) {
  Eigen::VectorXd mu(3);
  mu << 1.0, 0.5, -0.3;
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1.2, 0.3, -0.1, 0.3, 0.8, 0.2, -0.1, 0.2, 0.6;
  const ProjectedNormalParams p(mu, sigma);
  const auto samples = sample_projected_normal(p, n, seed);
  return sphere_chi_square(
      samples, [&](const UnitVector& u) { return std::exp(projected_normal_logpdf_recursive(u, p)); },
      z_bins, phi_bins);
}

}  // namespace sawsphere
