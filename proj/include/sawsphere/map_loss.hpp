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

// MAP classification loss on the sphere with fixed class directions.
//
// For a sample z with label c the per-sample term is
//
//   -log [ g(mu_c^T z) pi_c / sum_{l in C} g(mu_l^T z) pi_l ]
//
// where g is the vMF or angular Gaussian kernel, C the candidate classes and
// pi the class priors. By default C is the set of labels present in the batch
// and every prior is 1. The batch loss is the mean of the per-sample terms.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"
#include "sawsphere/sphere.hpp"

namespace sawsphere {

enum class KernelKind { vmf, agd };
enum class MeanMode { fixed_basis, spherical_estimate };

inline const char* to_string(KernelKind k) { return k == KernelKind::vmf ? "vmf" : "agd"; }
inline const char* to_string(MeanMode m) {
  return m == MeanMode::fixed_basis ? "fixed_basis" : "spherical_estimate";
}

inline KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "vmf") return KernelKind::vmf;
  if (s == "agd") return KernelKind::agd;
  throw ConfigError("unknown loss kind '" + s + "' (expected vmf or agd)");
}

inline MeanMode parse_mean_mode(const std::string& s) {
  if (s == "fixed_basis" || s == "fixed") return MeanMode::fixed_basis;
  if (s == "spherical_estimate" || s == "spherical") return MeanMode::spherical_estimate;
  throw ConfigError("unknown mean mode '" + s + "' (expected fixed_basis or spherical_estimate)");
}

/// Default kappa^2 per kernel: 7 for vMF, 0.2 for the angular Gaussian.
inline double default_kappa2(KernelKind k) { return k == KernelKind::vmf ? 7.0 : 0.2; }

struct LossConfig {
  KernelKind kind = KernelKind::agd;
  double kappa = std::sqrt(default_kappa2(KernelKind::agd));
  int dim = 0;          ///< latent dimension d
  int num_classes = 0;  ///< L <= d
  MeanMode mean_mode = MeanMode::fixed_basis;
  double series_tol = 1e-12;

  void validate() const {
    if (dim < 2) throw ConfigError("loss: dim must be >= 2");
    if (num_classes < 1) throw ConfigError("loss: num_classes must be >= 1");
    if (num_classes > dim) {
      throw ConfigError("loss: num_classes (" + std::to_string(num_classes) +
                        ") exceeds latent dim (" + std::to_string(dim) + ")");
    }
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("loss: kappa must be > 0");
    if (kind == KernelKind::agd && kappa > 50.0) throw ConfigError("loss: agd kappa must be <= 50");
    if (!(series_tol > 0.0)) throw ConfigError("loss: series_tol must be > 0");
  }
};

/// b x d matrix of unit rows with their labels.
struct LatentBatch {
  Eigen::MatrixXd z;
  std::vector<int> labels;

  void validate(int dim, int num_classes) const {
    if (z.rows() == 0) throw ShapeError("latent batch is empty");
    if (z.cols() != dim) {
      throw ShapeError("latent batch has " + std::to_string(z.cols()) + " columns, expected " +
                       std::to_string(dim));
    }
    if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
      throw ShapeError("latent batch: label count does not match rows");
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw DomainError("latent batch: label " + std::to_string(labels[i]) + " out of range");
      }
      if (std::abs(z.row(i).norm() - 1.0) > 1e-6) {
        throw DomainError("latent batch: row " + std::to_string(i) + " is not unit norm");
      }
    }
  }
};

/// Sorted distinct labels.
inline std::vector<int> classes_in_batch(const std::vector<int>& labels) {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Mean direction of each class in the batch. fixed_basis gives e_c;
/// spherical_estimate the normalized batch mean of the class rows.
inline std::map<int, UnitVector> class_directions(const LossConfig& cfg, const LatentBatch& batch) {
  std::map<int, UnitVector> out;
  const auto classes = classes_in_batch(batch.labels);
  if (cfg.mean_mode == MeanMode::fixed_basis) {
    for (int c : classes) out.emplace(c, UnitVector::basis(cfg.dim, c));
    return out;
  }
  std::map<int, Eigen::VectorXd> sums;
  for (int c : classes) sums.emplace(c, Eigen::VectorXd::Zero(cfg.dim));
  std::map<int, int> counts;
  for (Eigen::Index i = 0; i < batch.z.rows(); ++i) {
    sums[batch.labels[i]] += batch.z.row(i).transpose();
    ++counts[batch.labels[i]];
  }
  for (auto& [c, s] : sums) {
    const Eigen::VectorXd mean = s / counts[c];
    if (mean.norm() < 1e-12) {
      throw DegenerateMeanError("class " + std::to_string(c) + " has a vanishing batch mean");
    }
    out.emplace(c, UnitVector::normalized(mean));
  }
  return out;
}

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;  ///< d loss / d z, b x d, ambient coordinates
  int classes_in_batch = 0;
};

namespace detail {

struct LogKernel {
  double log_g;
  double ratio;
};

inline LogKernel eval_kernel(const LossConfig& cfg, double t) {
  // Rows are unit within 1e-6; the kernels want |t| <= 1.
  t = std::clamp(t, -1.0, 1.0);
  if (cfg.kind == KernelKind::vmf) return {vmf_log_kernel(t, cfg.kappa), cfg.kappa};
  const auto kv = agd_log_kernel_and_ratio(t, cfg.kappa, cfg.dim, cfg.series_tol);
  return {kv.log_g, kv.ratio};
}

}  // namespace detail

/// Loss and gradient with explicit class priors (length L). Classes with
/// prior 0 are dropped from the candidate set; every label in the batch
/// needs a positive prior. Directions of classes outside the batch are e_l
/// in either mean mode.
inline LossResult map_log_loss(const LossConfig& cfg, const LatentBatch& batch,
                               const std::vector<double>& priors) {
  cfg.validate();
  batch.validate(cfg.dim, cfg.num_classes);
  if (static_cast<int>(priors.size()) != cfg.num_classes) {
    throw ShapeError("map_log_loss: priors must have num_classes entries");
  }
  std::vector<int> candidates;
  for (int l = 0; l < cfg.num_classes; ++l) {
    if (priors[l] < 0.0 || !std::isfinite(priors[l])) {
      throw DomainError("map_log_loss: priors must be finite and >= 0");
    }
    if (priors[l] > 0.0) candidates.push_back(l);
  }
  for (int y : batch.labels) {
    if (!(priors[y] > 0.0)) throw DomainError("map_log_loss: batch label with zero prior");
  }

  const auto dirs = class_directions(cfg, batch);
  std::vector<Eigen::VectorXd> mu;
  std::vector<double> log_prior;
  std::vector<int> slot(cfg.num_classes, -1);
  for (int l : candidates) {
    slot[l] = static_cast<int>(mu.size());
    const auto it = dirs.find(l);
    mu.push_back(it != dirs.end() ? it->second.coords() : UnitVector::basis(cfg.dim, l).coords());
    log_prior.push_back(std::log(priors[l]));
  }

  const Eigen::Index b = batch.z.rows();
  const std::size_t k = mu.size();
  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(b, cfg.dim);
  out.classes_in_batch = static_cast<int>(dirs.size());
  std::vector<double> logits(k), ratios(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto zi = batch.z.row(i);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const auto kv = detail::eval_kernel(cfg, zi.dot(mu[j]));
      logits[j] = kv.log_g + log_prior[j];
      ratios[j] = kv.ratio;
      max_logit = std::max(max_logit, logits[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(logits[j] - max_logit);
    const double lse = max_logit + std::log(sum);
    const int c = slot[batch.labels[i]];
    total += lse - logits[c];
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double w = (p - (static_cast<int>(j) == c ? 1.0 : 0.0)) * ratios[j];
      out.grad.row(i) += w * mu[j].transpose();
    }
  }
  out.loss = total / static_cast<double>(b);
  out.grad /= static_cast<double>(b);
  return out;
}

/// Loss with the batch prior rule: pi_l = 1 for labels present, 0 otherwise.
inline LossResult map_log_loss(const LossConfig& cfg, const LatentBatch& batch) {
  cfg.validate();
  std::vector<double> priors(cfg.num_classes, 0.0);
  for (int y : batch.labels) {
    if (y >= 0 && y < cfg.num_classes) priors[y] = 1.0;
  }
  return map_log_loss(cfg, batch, priors);
}

}  // namespace sawsphere
