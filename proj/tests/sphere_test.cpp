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

#include "sawsphere/sphere.hpp"

#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "sawsphere/density_checks.hpp"

namespace sawsphere {
namespace {

// Direct summation of the AGD series in 50 digits, no log-space tricks.
double agd_kernel_bruteforce(double t, double kappa, int d, int terms = 600) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const Big x = boost::multiprecision::sqrt(Big(2)) * kappa * t;
  // c_n = Gamma((d+n)/2) / (n! Gamma(d/2)) x^n, stepped two at a time.
  Big even = 1, odd = x * boost::math::tgamma_ratio(Big(d + 1) / 2, Big(d) / 2);
  Big sum = even + odd;
  for (int n = 0; n + 2 < terms; ++n) {
    Big& c = (n % 2 == 0) ? even : odd;
    c *= Big(d + n) / 2 * x * x / ((n + 1) * (n + 2));
    sum += c;
  }
  return static_cast<double>(boost::multiprecision::log(sum)) - 0.5 * kappa * kappa;
}

TEST(UnitVector, Invariants) {
  EXPECT_THROW(UnitVector(Eigen::Vector2d(1.0, 1.0)), DomainError);
  EXPECT_THROW(UnitVector(Eigen::VectorXd::Ones(1)), DomainError);
  EXPECT_THROW(UnitVector::normalized(Eigen::Vector3d::Zero()), DomainError);
  const UnitVector u = UnitVector::normalized(Eigen::Vector2d(3.0, 4.0));
  EXPECT_NEAR(u(0), 0.6, 1e-15);
  EXPECT_NEAR(u(1), 0.8, 1e-15);
}

TEST(VmfKernel, Values) {
  EXPECT_EQ(vmf_log_kernel(0.0, 2.0), 0.0);
  EXPECT_EQ(vmf_log_kernel(1.0, 3.0), 3.0);
  EXPECT_EQ(vmf_log_kernel(-0.5, 2.0), -1.0);
  EXPECT_THROW(vmf_log_kernel(1.01, 1.0), DomainError);
  EXPECT_THROW(vmf_log_kernel(0.5, -1.0), DomainError);
}

TEST(VmfKernel, NormalizerIntegratesToOne) {
  std::mt19937_64 gen(7);
  const IsotropicSawParams p2(random_unit_vector(2, gen), 2.5);
  EXPECT_NEAR(integrate_circle([&](const UnitVector& u) { return std::exp(vmf_logpdf(u, p2)); },
                               20000),
              1.0, 1e-10);
  const IsotropicSawParams p3(random_unit_vector(3, gen), 1.7);
  EXPECT_NEAR(integrate_sphere_stratified(
                  [&](const UnitVector& u) { return std::exp(vmf_logpdf(u, p3)); }, 300, 3),
              1.0, 1e-3);
}

TEST(AgdKernel, TrivialValues) {
  for (double t : {-1.0, -0.3, 0.0, 0.9})
    for (int d : {2, 3, 64}) EXPECT_EQ(agd_log_kernel(t, 0.0, d), 0.0);
  EXPECT_NEAR(agd_log_kernel(0.0, 2.0, 3), -2.0, 1e-15);
}

TEST(AgdKernel, MatchesBruteForceSummation) {
  // 200 terms summed directly in extended precision.
  EXPECT_NEAR(agd_kernel_bruteforce(0.8, 1.5, 8), 2.5392244441929661, 1e-13);
  EXPECT_LE(std::abs(agd_log_kernel(0.8, 1.5, 8) / 2.5392244441929661 - 1.0), 1e-10);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> t_dist(-1.0, 1.0), k_dist(0.0, 3.0);
  std::uniform_int_distribution<int> d_dist(2, 40);
  for (int i = 0; i < 50; ++i) {
    const double t = t_dist(gen), k = k_dist(gen);
    const int d = d_dist(gen);
    const double ref = agd_kernel_bruteforce(t, k, d);
    EXPECT_NEAR(agd_log_kernel(t, k, d), ref, 1e-10 * std::max(1.0, std::abs(ref)))
        << t << " " << k << " " << d;
  }
}

TEST(AgdKernel, NegativeArgumentsStayAccurate) {
  // Large |kappa t| with t < 0: compare against the isotropic projected
  // normal evaluated through the I_d recursion.
  for (int d : {3, 16, 128, 512}) {
    for (double kappa : {2.0, 5.0, 12.0}) {
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
      mu(0) = kappa;
      const auto p = ProjectedNormalParams::isotropic(mu, 1.0);
      Eigen::VectorXd uv = Eigen::VectorXd::Zero(d);
      uv(0) = -0.8;
      uv(1) = 0.6;
      const UnitVector u(uv);
      const double via_recursion = projected_normal_logpdf_recursive(u, p) + log_sphere_area(d);
      EXPECT_NEAR(agd_log_kernel(-0.8, kappa, d), via_recursion,
                  1e-9 * std::max(1.0, std::abs(via_recursion)))
          << d << " " << kappa;
    }
  }
}

TEST(AgdKernel, ReferenceValuesWithCancellation) {
  // 40-digit direct summation of the series and its derivative.
  EXPECT_NEAR(agd_log_kernel(-0.73294527169490409, 4.1578970487603542, 2), -11.119959168504285,
              1e-13);
  EXPECT_NEAR(agd_log_kernel_ratio(-0.73294527169490409, 4.1578970487603542, 2),
              2.1899923358293227, 1e-13);
  EXPECT_NEAR(agd_log_kernel(-0.81107355856143626, 0.66842033095926756, 64), -4.4712328176308630,
              1e-13);
  EXPECT_NEAR(agd_log_kernel_ratio(-0.81107355856143626, 0.66842033095926756, 64),
              5.1491209124322838, 1e-13);
}

TEST(AgdKernel, RatioMatchesFiniteDifference) {
  EXPECT_EQ(agd_log_kernel_ratio(0.4, 0.0, 5), 0.0);
  const double h = 1e-6;
  const double fd = (agd_log_kernel(0.3 + h, 1.0, 4) - agd_log_kernel(0.3 - h, 1.0, 4)) / (2 * h);
  const double ratio = agd_log_kernel_ratio(0.3, 1.0, 4);
  EXPECT_LE(std::abs(ratio / fd - 1.0), 1e-6);
  // Arbitrary-precision derivative of the series at the same point.
  EXPECT_NEAR(ratio, 2.0255359902007292, 1e-12);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> t_dist(-0.99, 0.99), k_dist(0.1, 6.0);
  for (int i = 0; i < 40; ++i) {
    const double t = t_dist(gen), k = k_dist(gen);
    for (int d : {2, 7, 64}) {
      const double num =
          (agd_log_kernel(t + h, k, d, 1e-15) - agd_log_kernel(t - h, k, d, 1e-15)) / (2 * h);
      const double r = agd_log_kernel_ratio(t, k, d);
      EXPECT_GT(r, 0.0);
      EXPECT_LE(std::abs(r / num - 1.0), 1e-6) << t << " " << k << " " << d;
    }
  }
}

TEST(Kernels, StrictlyIncreasingInT) {
  for (double kappa : {0.3, 1.0, 4.0}) {
    double prev_agd = agd_log_kernel(-1.0, kappa, 10);
    double prev_vmf = vmf_log_kernel(-1.0, kappa);
    for (double t = -0.99; t <= 1.0; t += 0.01) {
      const double a = agd_log_kernel(std::min(t, 1.0), kappa, 10);
      const double v = vmf_log_kernel(std::min(t, 1.0), kappa);
      EXPECT_GT(a, prev_agd);
      EXPECT_GT(v, prev_vmf);
      prev_agd = a;
      prev_vmf = v;
    }
  }
}

TEST(AgdKernel, Errors) {
  EXPECT_THROW(agd_log_kernel(1.1, 1.0, 3), DomainError);
  EXPECT_THROW(agd_log_kernel(0.5, 1.0, 1), DomainError);
  EXPECT_THROW(agd_log_kernel(0.5, 60.0, 3), DomainError);
  EXPECT_THROW(agd_log_kernel(0.5, 1.0, 3, 0.0), DomainError);
}

TEST(ProjectedNormal, ParameterValidation) {
  Eigen::Matrix2d asym;
  asym << 1.0, 0.2, 0.1, 1.0;
  EXPECT_THROW(ProjectedNormalParams(Eigen::Vector2d(1, 0), asym), DomainError);
  Eigen::Matrix2d singular;
  singular << 1.0, 1.0, 1.0, 1.0;
  EXPECT_THROW(ProjectedNormalParams(Eigen::Vector2d(1, 0), singular), SingularCovarianceError);
  EXPECT_THROW(ProjectedNormalParams(Eigen::Vector3d(1, 0, 0), Eigen::Matrix2d::Identity()),
               ShapeError);
}

TEST(ProjectedNormal, UniformLimit) {
  const auto p3 = ProjectedNormalParams::isotropic(Eigen::Vector3d::Zero(), 1.0);
  const UnitVector u3 = UnitVector::normalized(Eigen::Vector3d(0.3, -0.2, 0.9));
  EXPECT_NEAR(projected_normal_logpdf_recursive(u3, p3), -2.5310242469692907, 1e-13);
  EXPECT_NEAR(-std::log(4.0 * kPi), -2.5310242469692907, 1e-15);
  const auto p2 = ProjectedNormalParams::isotropic(Eigen::Vector2d::Zero(), 1.0);
  const UnitVector u2 = UnitVector::normalized(Eigen::Vector2d(-1.0, 0.4));
  EXPECT_NEAR(projected_normal_logpdf_recursive(u2, p2), -std::log(2.0 * kPi), 1e-13);

  std::mt19937_64 gen(3);
  for (int d : {2, 3, 5, 10, 40}) {
    for (double s2 : {0.25, 1.0, 7.0}) {
      const auto p = ProjectedNormalParams::isotropic(Eigen::VectorXd::Zero(d), s2);
      const UnitVector u = random_unit_vector(d, gen);
      const double expected = -log_sphere_area(d);
      EXPECT_NEAR(projected_normal_logpdf_recursive(u, p), expected, 1e-12);
      EXPECT_NEAR(projected_normal_logpdf_series(u, p), expected, 1e-12);
      EXPECT_NEAR(projected_normal_logpdf_closed(u, p), expected, 1e-12);
    }
  }
}

TEST(ProjectedNormal, MonteCarloDensityAtMode) {
  // mu = (2, 0, 0), Sigma = I, u = e1. Estimate the density from the fraction
  // of normalized Gaussian draws inside a small cap around e1.
  Eigen::Vector3d mu(2.0, 0.0, 0.0);
  const auto p = ProjectedNormalParams::isotropic(mu, 1.0);
  const UnitVector e1 = UnitVector::basis(3, 0);
  const double analytic = std::exp(projected_normal_logpdf_recursive(e1, p));
  EXPECT_NEAR(analytic, 0.79485659408751456, 1e-12);

  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal;
  const double cap = 0.05;
  const double cos_cap = std::cos(cap);
  long inside = 0;
  const long n = 10'000'000;
  for (long i = 0; i < n; ++i) {
    const double x = 2.0 + normal(gen), y = normal(gen), z = normal(gen);
    if (x / std::sqrt(x * x + y * y + z * z) > cos_cap) ++inside;
  }
  const double estimate = inside / (n * 2.0 * kPi * (1.0 - cos_cap));
  EXPECT_LE(std::abs(estimate / analytic - 1.0), 0.02);
}

TEST(ProjectedNormal, ThreeFormsAgree) {
  const TrifectaReport rep = trifecta_check({2, 3, 5, 10}, 50, 42);
  EXPECT_EQ(rep.cases, 200);
  EXPECT_LE(rep.max_recursive_vs_closed, 1e-8);
  EXPECT_LE(rep.max_series_vs_closed, 1e-8);
  EXPECT_LE(rep.max_recursive_vs_series, 1e-8);
}

TEST(ProjectedNormal, IsotropicReductionToKernel) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> norm_dist(0.1, 3.0), s_dist(0.3, 2.0);
  for (int d : {2, 3, 6, 20}) {
    for (int k = 0; k < 10; ++k) {
      const UnitVector dir = random_unit_vector(d, gen);
      const double sigma = s_dist(gen);
      const double m = norm_dist(gen);
      const auto p = ProjectedNormalParams::isotropic(dir.coords() * m, sigma * sigma);
      const UnitVector u = random_unit_vector(d, gen);
      const double kappa = m / sigma;
      const double via_kernel = -log_sphere_area(d) + agd_log_kernel(u.dot(dir), kappa, d, 1e-15);
      EXPECT_NEAR(projected_normal_logpdf_series(u, p), via_kernel,
                  1e-11 * std::max(1.0, std::abs(via_kernel)));
    }
  }
}

TEST(ProjectedNormal, RotationEquivariance) {
  std::mt19937_64 gen(23);
  for (int d : {2, 3, 5}) {
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd mu = random_mean(d, 3.0, gen);
      const Eigen::MatrixXd sigma = random_spd(d, 0.3, 3.0, gen);
      const Eigen::MatrixXd r = random_rotation(d, gen);
      const UnitVector u = random_unit_vector(d, gen);
      const ProjectedNormalParams p(mu, sigma);
      Eigen::MatrixXd rs = r * sigma * r.transpose();
      rs = 0.5 * (rs + rs.transpose());
      const ProjectedNormalParams pr(r * mu, rs);
      const UnitVector ru = UnitVector::normalized(r * u.coords());
      EXPECT_NEAR(projected_normal_logpdf_recursive(ru, pr), projected_normal_logpdf_recursive(u, p),
                  1e-10);
      EXPECT_NEAR(projected_normal_logpdf_closed(ru, pr), projected_normal_logpdf_closed(u, p), 1e-10);
      EXPECT_NEAR(projected_normal_logpdf_series(ru, pr), projected_normal_logpdf_series(u, p), 1e-10);
    }
  }
}

TEST(ProjectedNormal, NormalizesOnCircleAndSphere) {
  const auto rep = projected_normal_normalization_check(3, 8, Convention::derived, 100000, 400);
  EXPECT_LE(rep.max_circle_error(), 1e-6);
  EXPECT_LE(rep.max_sphere_error(), 1e-3);
}

TEST(ProjectedNormal, PrintedConstantsDoNotNormalize) {
  const auto rep = projected_normal_normalization_check(3, 8, Convention::as_printed, 20000, 100);
  EXPECT_GT(rep.max_circle_error(), 1e-2);
  EXPECT_GT(rep.max_sphere_error(), 1e-2);
}

TEST(AgdDensity, Normalizes) {
  const auto rep = agd_normalization_check(5, 31, 100000, 400);
  EXPECT_LE(rep.max_circle_error(), 1e-6);
  EXPECT_LE(rep.max_sphere_error(), 1e-3);
}

TEST(Sampler, SymmetricMeanIsZero) {
  const auto p = ProjectedNormalParams::isotropic(Eigen::Vector3d::Zero(), 1.0);
  const auto samples = sample_projected_normal(p, 1'000'000, 5);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& s : samples) mean += s.coords();
  mean /= static_cast<double>(samples.size());
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.005);
}

TEST(Sampler, MeanResultantAlignsWithMu) {
  const auto p = ProjectedNormalParams::isotropic(Eigen::Vector3d(3.0, 0.0, 0.0), 1.0);
  const auto samples = sample_projected_normal(p, 100000, 6);
  Eigen::Vector3d resultant = Eigen::Vector3d::Zero();
  for (const auto& s : samples) resultant += s.coords();
  EXPECT_GE(resultant.normalized()(0), 0.99);
}

TEST(Sampler, DeterministicUnderSeed) {
  const auto p = ProjectedNormalParams::isotropic(Eigen::Vector3d(1.0, 0.0, 0.0), 1.0);
  const auto a = sample_projected_normal(p, 100, 77);
  const auto b = sample_projected_normal(p, 100, 77);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].coords(), b[i].coords());
}

TEST(Sampler, ChiSquareGoodnessOfFit) {
  const ChiSquareResult res = sampler_chi_square_check(1'000'000, 2024);
  EXPECT_NEAR(res.expected_mass, 1.0, 1e-9);
  EXPECT_GT(res.pvalue, 0.01) << "chi2 = " << res.statistic << " dof = " << res.dof;
}

TEST(Sampler, ChiSquareDetectsWrongDensity) {
  // Same samples against a vMF with a different mean must be rejected.
  Eigen::VectorXd mu(3);
  mu << 1.0, 0.5, -0.3;
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1.2, 0.3, -0.1, 0.3, 0.8, 0.2, -0.1, 0.2, 0.6;
  const ProjectedNormalParams p(mu, sigma);
  const auto samples = sample_projected_normal(p, 200000, 1);
  const auto iso = ProjectedNormalParams::isotropic(mu, 1.0);
  const auto res = sphere_chi_square(
      samples, [&](const UnitVector& u) { return std::exp(projected_normal_logpdf_recursive(u, iso)); },
      20, 20);
  EXPECT_LT(res.pvalue, 1e-6);
}

}  // namespace
}  // namespace sawsphere
