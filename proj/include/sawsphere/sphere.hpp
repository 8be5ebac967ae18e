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

// Densities and samplers on the unit sphere S^{d-1}.
//
// Isotropic kernels depend on a point z only through t = z^T mu:
//
//   vMF:  g(t) = exp(kappa t)
//   AGD:  g(t) = exp(-kappa^2/2) sum_n (sqrt2 kappa t)^n Gamma((d+n)/2) / (n! Gamma(d/2))
//
// The AGD kernel is the projection of N(mu, sigma^2 I) with
// kappa = |mu| / sigma; with this normalization (1/omega_{d-1}) g(t) is a
// probability density on the sphere.
//
// The general projected normal N(mu, Sigma) / |.| has three equivalent
// log-density evaluations. With A = u^T S^-1 u, lambda^2 = mu^T S^-1 mu and
// gamma = u^T S^-1 mu / sqrt(A):
//
//   recursive:  A^{-d/2} / ((2pi)^{(d-1)/2} |S|^{1/2}) e^{-(lambda^2 - gamma^2)/2} I_d(gamma)
//   series:     (1/omega_{d-1}) A^{-d/2} |S|^{-1/2} e^{-lambda^2/2} S_d(gamma)
//   closed:     A^{-d/2} / ((2pi)^{d/2} |S|^{1/2}) e^{-lambda^2/2 + gamma^2/4} Gamma(d) D_{-d}(-gamma)
//
// Convention::as_printed reproduces an alternative, unnormalized set of
// constants ((2pi)^{d/2-1} and alpha = u^T S^-1 mu / A for the recursive form;
// e^{-gamma^2/8} D_{-d}(sqrt2 gamma) for the closed form). It exists only as
// a negative control for the normalization checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"
#include "sawsphere/special_functions.hpp"

namespace sawsphere {

inline constexpr double kUnitTolerance = 1e-9;

/// A point on S^{d-1}, d >= 2.
class UnitVector {
 public:
  explicit UnitVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) throw DomainError("UnitVector: dimension must be >= 2");
    const double norm = coords_.norm();
    if (!(std::abs(norm - 1.0) <= kUnitTolerance)) {
      throw DomainError("UnitVector: norm " + std::to_string(norm) + " is not 1");
    }
  }

  static UnitVector normalized(const Eigen::VectorXd& v) {
    const double norm = v.norm();
    if (!(norm > 0.0)) throw DomainError("UnitVector: cannot normalize a zero vector");
    return UnitVector(v / norm);
  }

  static UnitVector basis(int d, int index) {
    if (index < 0 || index >= d) throw DomainError("UnitVector: basis index out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(index) = 1.0;
    return UnitVector(std::move(e));
  }

  [[nodiscard]] const Eigen::VectorXd& coords() const { return coords_; }
  [[nodiscard]] int dim() const { return static_cast<int>(coords_.size()); }
  [[nodiscard]] double dot(const UnitVector& other) const { return coords_.dot(other.coords_); }
  [[nodiscard]] double operator()(int i) const { return coords_(i); }

 private:
  Eigen::VectorXd coords_;
};

struct IsotropicSawParams {
  UnitVector mu;
  double kappa = 0.0;

  IsotropicSawParams(UnitVector mean, double concentration)
      : mu(std::move(mean)), kappa(concentration) {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
      throw DomainError("IsotropicSawParams: kappa must be finite and >= 0");
    }
  }
};

/// log of the surface area omega_{d-1} of S^{d-1}.
inline double log_sphere_area(int d) {
  if (d < 1) throw DomainError("log_sphere_area: d must be >= 1");
  return std::numbers::ln2 + 0.5 * d * kLogPi - gamma_ln(0.5 * d);
}

namespace detail {
inline void check_cosine(double t, const char* who) {
  if (!(std::abs(t) <= 1.0 + kUnitTolerance)) {
    throw DomainError(std::string(who) + ": |t| must be <= 1, got " + std::to_string(t));
  }
}
inline void check_kappa(double kappa, const char* who) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError(std::string(who) + ": kappa must be finite and >= 0");
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Isotropic kernels
// ---------------------------------------------------------------------------

/// log g(t) = kappa t. The normalizer a_kappa is left out.
inline double vmf_log_kernel(double t, double kappa) {
  detail::check_cosine(t, "vmf_log_kernel");
  detail::check_kappa(kappa, "vmf_log_kernel");
  return kappa * t;
}

/// log a_kappa for the vMF density on S^{d-1}, so that
/// log f(z) = vmf_log_normalizer + vmf_log_kernel.
inline double vmf_log_normalizer(double kappa, int d) {
  detail::check_kappa(kappa, "vmf_log_normalizer");
  if (kappa == 0.0) return -log_sphere_area(d);
  const double order = 0.5 * d - 1.0;
  const double log_bessel = std::log(std::cyl_bessel_i(order, kappa));
  return order * std::log(kappa) - 0.5 * d * kLog2Pi - log_bessel;
}

/// log of the angular Gaussian kernel.
///
/// The series is split into its even and odd powers of kappa t, each a
/// positive-term sum; terms are added until the next one falls below
/// `tol` times the running sum. When negative t makes the two halves cancel,
/// the underlying moment integral is evaluated by quadrature instead.
inline double agd_log_kernel(double t, double kappa, int d, double tol = 1e-12) {
  detail::check_cosine(t, "agd_log_kernel");
  detail::check_kappa(kappa, "agd_log_kernel");
  if (d < 2) throw DomainError("agd_log_kernel: d must be >= 2");
  if (kappa > 50.0) throw DomainError("agd_log_kernel: kappa must be <= 50");
  if (!(tol > 0.0)) throw DomainError("agd_log_kernel: tol must be positive");
  if (kappa == 0.0) return 0.0;
  const double log_c0 = (0.5 * d - 1.0) * std::numbers::ln2 + gamma_ln(0.5 * d);
  return -0.5 * kappa * kappa + log_gauss_moment(d, kappa * t, tol) - log_c0;
}

/// g'(t) / g(t) for the angular Gaussian kernel.
///
/// Term-wise differentiation of the series in t gives kappa M(d+1, kappa t)
/// / M(d, kappa t), since ds M(d, s) = M(d+1, s).
inline double agd_log_kernel_ratio(double t, double kappa, int d, double tol = 1e-12) {
  detail::check_cosine(t, "agd_log_kernel_ratio");
  detail::check_kappa(kappa, "agd_log_kernel_ratio");
  if (d < 2) throw DomainError("agd_log_kernel_ratio: d must be >= 2");
  if (kappa > 50.0) throw DomainError("agd_log_kernel_ratio: kappa must be <= 50");
  if (!(tol > 0.0)) throw DomainError("agd_log_kernel_ratio: tol must be positive");
  if (kappa == 0.0) return 0.0;
  const double s = kappa * t;
  return kappa * std::exp(log_gauss_moment(d + 1, s, tol) - log_gauss_moment(d, s, tol));
}

struct KernelValue {
  double log_g = 0.0;
  double ratio = 0.0;  ///< g'(t) / g(t)
};

/// log g and g'/g together; shares M(d, kappa t) between the two.
inline KernelValue agd_log_kernel_and_ratio(double t, double kappa, int d, double tol = 1e-12) {
  detail::check_cosine(t, "agd_log_kernel_and_ratio");
  detail::check_kappa(kappa, "agd_log_kernel_and_ratio");
  if (d < 2) throw DomainError("agd_log_kernel_and_ratio: d must be >= 2");
  if (kappa > 50.0) throw DomainError("agd_log_kernel_and_ratio: kappa must be <= 50");
  if (!(tol > 0.0)) throw DomainError("agd_log_kernel_and_ratio: tol must be positive");
  if (kappa == 0.0) return {};
  const double s = kappa * t;
  const double log_m = log_gauss_moment(d, s, tol);
  const double log_c0 = (0.5 * d - 1.0) * std::numbers::ln2 + gamma_ln(0.5 * d);
  return {-0.5 * kappa * kappa + log_m - log_c0,
          kappa * std::exp(log_gauss_moment(d + 1, s, tol) - log_m)};
}

/// log a_kappa for the angular Gaussian: the kernel integrates to omega_{d-1}.
inline double agd_log_normalizer(int d) { return -log_sphere_area(d); }

inline double agd_logpdf(const UnitVector& z, const IsotropicSawParams& p, double tol = 1e-12) {
  if (z.dim() != p.mu.dim()) throw ShapeError("agd_logpdf: dimension mismatch");
  const double t = std::clamp(z.dot(p.mu), -1.0, 1.0);
  return agd_log_normalizer(z.dim()) + agd_log_kernel(t, p.kappa, z.dim(), tol);
}

inline double vmf_logpdf(const UnitVector& z, const IsotropicSawParams& p) {
  if (z.dim() != p.mu.dim()) throw ShapeError("vmf_logpdf: dimension mismatch");
  const double t = std::clamp(z.dot(p.mu), -1.0, 1.0);
  return vmf_log_normalizer(p.kappa, z.dim()) + vmf_log_kernel(t, p.kappa);
}

// ---------------------------------------------------------------------------
// General projected normal
// ---------------------------------------------------------------------------

/// Gaussian N(mu, Sigma) whose normalization x/|x| lives on S^{d-1}.
class ProjectedNormalParams {
 public:
  ProjectedNormalParams(Eigen::VectorXd mu, Eigen::MatrixXd sigma)
      : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    const auto d = mu_.size();
    if (d < 2) throw DomainError("ProjectedNormalParams: dimension must be >= 2");
    if (sigma_.rows() != d || sigma_.cols() != d) {
      throw ShapeError("ProjectedNormalParams: sigma must be d x d");
    }
    if (!((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() <= 1e-10)) {
      throw DomainError("ProjectedNormalParams: sigma is not symmetric");
    }
    llt_.compute(sigma_);
    if (llt_.info() != Eigen::Success || !(llt_.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
      throw SingularCovarianceError("ProjectedNormalParams: sigma is not positive definite");
    }
    const Eigen::VectorXd diag = llt_.matrixL().toDenseMatrix().diagonal();
    log_det_ = 2.0 * diag.array().log().sum();
    if (!std::isfinite(log_det_)) throw SingularCovarianceError("ProjectedNormalParams: singular sigma");
    precision_ = llt_.solve(Eigen::MatrixXd::Identity(d, d));
    precision_ = 0.5 * (precision_ + precision_.transpose());
    precision_mu_ = precision_ * mu_;
    lambda2_ = mu_.dot(precision_mu_);
  }

  /// Isotropic covariance sigma^2 I.
  static ProjectedNormalParams isotropic(Eigen::VectorXd mu, double sigma2) {
    const auto d = mu.size();
    return {std::move(mu), sigma2 * Eigen::MatrixXd::Identity(d, d)};
  }

  [[nodiscard]] int dim() const { return static_cast<int>(mu_.size()); }
  [[nodiscard]] const Eigen::VectorXd& mu() const { return mu_; }
  [[nodiscard]] const Eigen::MatrixXd& sigma() const { return sigma_; }
  [[nodiscard]] const Eigen::MatrixXd& precision() const { return precision_; }
  [[nodiscard]] Eigen::MatrixXd cholesky_factor() const { return llt_.matrixL(); }
  [[nodiscard]] double log_det() const { return log_det_; }
  /// lambda^2 = mu^T Sigma^-1 mu.
  [[nodiscard]] double lambda2() const { return lambda2_; }

  /// (u^T S^-1 u, u^T S^-1 mu) for a direction u.
  [[nodiscard]] std::pair<double, double> forms(const UnitVector& u) const {
    if (u.dim() != dim()) throw ShapeError("ProjectedNormalParams: dimension mismatch");
    return {u.coords().dot(precision_ * u.coords()), u.coords().dot(precision_mu_)};
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd precision_;
  Eigen::VectorXd precision_mu_;
  double log_det_ = 0.0;
  double lambda2_ = 0.0;
};

enum class Convention { derived, as_printed };

inline const char* to_string(Convention c) {
  return c == Convention::derived ? "derived" : "as_printed";
}

/// Log-density via the I_d recurrence.
inline double projected_normal_logpdf_recursive(const UnitVector& u, const ProjectedNormalParams& p,
                                                Convention convention = Convention::derived) {
  const int d = p.dim();
  const auto [a, b] = p.forms(u);
  if (convention == Convention::as_printed) {
    const double alpha = b / a;
    return -0.5 * d * std::log(a) - (0.5 * d - 1.0) * kLog2Pi - 0.5 * p.log_det() -
           0.5 * (p.lambda2() - alpha * alpha) + log_i_d(d, alpha);
  }
  const double gamma = b / std::sqrt(a);
  // lambda^2 - gamma^2 >= 0 by Cauchy-Schwarz in the Sigma^-1 inner product.
  const double gap = std::max(0.0, p.lambda2() - gamma * gamma);
  return -0.5 * d * std::log(a) - 0.5 * (d - 1.0) * kLog2Pi - 0.5 * p.log_det() - 0.5 * gap +
         log_i_d(d, gamma);
}

/// Log-density via the power series in gamma.
inline double projected_normal_logpdf_series(const UnitVector& u, const ProjectedNormalParams& p,
                                             double tol = 1e-15) {
  const int d = p.dim();
  const auto [a, b] = p.forms(u);
  const double gamma = b / std::sqrt(a);
  return -log_sphere_area(d) - 0.5 * d * std::log(a) - 0.5 * p.log_det() - 0.5 * p.lambda2() +
         log_saw_series(d, gamma, tol);
}

/// Log-density via the parabolic cylinder function D_{-d}.
inline double projected_normal_logpdf_closed(const UnitVector& u, const ProjectedNormalParams& p,
                                             Convention convention = Convention::derived) {
  const int d = p.dim();
  const auto [a, b] = p.forms(u);
  const double gamma = b / std::sqrt(a);
  const double base = -0.5 * d * std::log(a) - 0.5 * d * kLog2Pi - 0.5 * p.log_det() -
                      0.5 * p.lambda2() + gamma_ln(d);
  if (convention == Convention::as_printed) {
    return base - 0.125 * gamma * gamma +
           log_parabolic_cylinder_neg(d, std::numbers::sqrt2 * gamma);
  }
  return base + 0.25 * gamma * gamma + log_parabolic_cylinder_neg(d, -gamma);
}

/// Draws x ~ N(mu, Sigma) through the Cholesky factor and returns x/|x|.
template <class Generator>
std::vector<UnitVector> sample_projected_normal(const ProjectedNormalParams& p, std::size_t n,
                                                Generator& gen) {
  if (n < 1) throw DomainError("sample_projected_normal: n must be >= 1");
  const int d = p.dim();
  const Eigen::MatrixXd chol = p.cholesky_factor();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<UnitVector> out;
  out.reserve(n);
  Eigen::VectorXd xi(d);
  while (out.size() < n) {
    for (int i = 0; i < d; ++i) xi(i) = normal(gen);
    const Eigen::VectorXd x = p.mu() + chol * xi;
    const double norm = x.norm();
    if (norm == 0.0) continue;  // probability zero; resample
    out.emplace_back(x / norm);
  }
  return out;
}

inline std::vector<UnitVector> sample_projected_normal(const ProjectedNormalParams& p,
                                                       std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return sample_projected_normal(p, n, gen);
}

}  // namespace sawsphere
