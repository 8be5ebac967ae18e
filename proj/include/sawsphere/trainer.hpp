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

// Online training loop and nearest-class-mean evaluation.
//
// One step per stream batch B_S:
//   B_M <- random retrieval from memory
//   B   <- B_S u B_M, then n augmented views of B
//   z   <- encoder(B), loss and gradient, Adam
//   memory <- reservoir update with B_S only
//
// Nothing here takes a task id. Evaluation points are stream positions.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"
#include "sawsphere/map_loss.hpp"
#include "sawsphere/network.hpp"
#include "sawsphere/replay_memory.hpp"
#include "sawsphere/stream.hpp"

namespace sawsphere {

struct TrainConfig {
  std::size_t stream_batch = 10;
  std::size_t memory_batch = 64;
  int views = 5;
  LossConfig loss;
  double lr = 1e-3;
  std::size_t memory_capacity = 200;
  AugmentConfig augment;
  std::uint64_t seed = 0;

  void validate() const {
    if (stream_batch < 1) throw ConfigError("stream_batch must be >= 1");
    if (memory_batch < 1) throw ConfigError("memory_batch must be >= 1");
    if (views < 0) throw ConfigError("views must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    loss.validate();
  }
};

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  int classes_in_batch = 0;
  std::size_t memory_size = 0;
};

// ---------------------------------------------------------------------------
// NCM
// ---------------------------------------------------------------------------

/// L2-normalized rows; zero rows stay zero.
inline Eigen::MatrixXd normalize_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
  return m;
}

struct NcmModel {
  std::vector<int> classes;  ///< ascending
  Eigen::MatrixXd means;     ///< one unit row per entry of `classes`

  [[nodiscard]] bool has_class(int c) const {
    return std::binary_search(classes.begin(), classes.end(), c);
  }

  /// Cosine argmax over the fitted means; ties go to the lowest label.
  [[nodiscard]] std::vector<int> predict_representations(const Eigen::MatrixXd& h) const {
    if (classes.empty()) throw DomainError("ncm: model is not fitted");
    if (h.cols() != means.cols()) throw ShapeError("ncm: representation width mismatch");
    const Eigen::MatrixXd scores = normalize_rows(h) * means.transpose();
    std::vector<int> out(static_cast<std::size_t>(h.rows()));
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < scores.cols(); ++c) {
        if (scores(i, c) > scores(i, best)) best = c;
      }
      out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
    }
    return out;
  }

  [[nodiscard]] std::vector<int> predict(const Network& net, const Eigen::MatrixXd& x) const {
    return predict_representations(net.represent(x));
  }
};

/// Per-class arithmetic mean of the trunk representations, then normalized.
inline NcmModel ncm_fit_representations(const Eigen::MatrixXd& h, const std::vector<int>& y) {
  if (h.rows() == 0) throw DomainError("ncm: cannot fit on an empty memory");
  std::set<int> labels(y.begin(), y.end());
  NcmModel m;
  m.classes.assign(labels.begin(), labels.end());
  m.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.classes.size()), h.cols());
  std::vector<int> counts(m.classes.size(), 0);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const auto k = std::lower_bound(m.classes.begin(), m.classes.end(), y[i]) - m.classes.begin();
    m.means.row(k) += h.row(i);
    ++counts[k];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) m.means.row(static_cast<Eigen::Index>(k)) /= counts[k];
  m.means = normalize_rows(m.means);
  return m;
}

inline NcmModel ncm_fit(const Network& net, const LabeledBatch& memory_dump) {
  if (memory_dump.empty()) throw DomainError("ncm: cannot fit on an empty memory");
  return ncm_fit_representations(net.represent(memory_dump.x), memory_dump.y);
}

/// Argmax of e_c^T z over `classes` (the fixed directions themselves), ties
/// to the lowest label. Used when there is no memory to fit NCM on.
inline std::vector<int> fixed_direction_predict(const Network& net, const Eigen::MatrixXd& x,
                                                const std::vector<int>& classes) {
  if (classes.empty()) throw DomainError("fixed-direction classifier: no classes");
  const Eigen::MatrixXd z = net.forward(x).z;
  std::vector<int> sorted(classes);
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int best = sorted.front();
    for (int c : sorted) {
      if (z(i, c) > z(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Accuracy matrix
// ---------------------------------------------------------------------------

/// Row k holds accuracies on tasks 0..k at evaluation point k.
struct AccuracyMatrix {
  int num_tasks = 0;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] bool complete() const {
    return num_tasks > 0 && static_cast<int>(rows.size()) == num_tasks &&
           static_cast<int>(rows.back().size()) == num_tasks;
  }

  /// K x K CSV, blanks above the diagonal.
  void write_csv(std::ostream& os) const {
    os << "checkpoint";
    for (int j = 0; j < num_tasks; ++j) os << ",task_" << j;
    os << '\n';
    char buf[64];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      os << k;
      for (int j = 0; j < num_tasks; ++j) {
        os << ',';
        if (j < static_cast<int>(rows[k].size())) {
          const auto r = std::to_chars(buf, buf + sizeof(buf), rows[k][j]);
          os << std::string_view(buf, r.ptr - buf);
        }
      }
      os << '\n';
    }
  }
};

inline double final_average_accuracy(const AccuracyMatrix& m) {
  if (!m.complete()) throw DomainError("final_average_accuracy: matrix is incomplete");
  double s = 0.0;
  for (double v : m.rows.back()) s += v;
  return s / static_cast<double>(m.rows.back().size());
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(TrainConfig cfg, Network net, std::optional<ImageShape> image = std::nullopt)
      : cfg_(std::move(cfg)),
        net_(std::move(net)),
        memory_(cfg_.memory_capacity, net_.spec().input_dim, cfg_.seed ^ 0x5851f42d4c957f2dULL),
        augmenter_(cfg_.augment, image),
        gen_(cfg_.seed) {
    cfg_.validate();
    adam_.lr = cfg_.lr;
    if (cfg_.loss.dim != net_.spec().latent_dim()) {
      throw ConfigError("loss dim " + std::to_string(cfg_.loss.dim) + " does not match encoder output " +
                        std::to_string(net_.spec().latent_dim()));
    }
  }

  /// One pass of the loop body for a single stream batch.
  StepLog step(const LabeledBatch& stream_batch) {
    if (stream_batch.empty()) throw ShapeError("trainer: empty stream batch");
    const LabeledBatch mem_batch = memory_.retrieve(cfg_.memory_batch, gen_);
    const LabeledBatch joint = concat(stream_batch, mem_batch);
    const LabeledBatch views = multi_view(joint, cfg_.views, augmenter_, gen_);
    const auto out = net_.forward(views.x);
    const auto loss = map_log_loss(cfg_.loss, LatentBatch{out.z, views.y});
    adam_step(adam_, net_, net_.backward(out.tape, loss.grad));
    memory_.update(stream_batch);
    for (int y : stream_batch.y) seen_.insert(y);
    StepLog entry{log_.size(), loss.loss, loss.classes_in_batch, memory_.size()};
    log_.push_back(entry);
    return entry;
  }

  /// Predictions for evaluation: NCM on the memory when it holds anything,
  /// else the fixed directions of the classes seen so far.
  [[nodiscard]] std::vector<int> predict(const Eigen::MatrixXd& x) const {
    if (!memory_.empty()) return ncm_fit(net_, memory_.dump()).predict(net_, x);
    return fixed_direction_predict(net_, x, std::vector<int>(seen_.begin(), seen_.end()));
  }

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  [[nodiscard]] const Network& network() const { return net_; }
  [[nodiscard]] const ReplayMemory& memory() const { return memory_; }
  [[nodiscard]] const std::vector<StepLog>& log() const { return log_; }
  [[nodiscard]] const std::mt19937_64& rng() const { return gen_; }

 private:
  TrainConfig cfg_;
  Network net_;
  ReplayMemory memory_;
  Augmenter augmenter_;
  AdamState adam_;
  std::mt19937_64 gen_;
  std::vector<StepLog> log_;
  std::set<int> seen_;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<StepLog>& log) {
  os << "step,loss,classes_in_batch,memory_size\n";
  char buf[64];
  for (const auto& e : log) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), e.loss);
    os << e.step << ',' << std::string_view(buf, r.ptr - buf) << ',' << e.classes_in_batch << ','
       << e.memory_size << '\n';
  }
}

struct TrainResult {
  Trainer trainer;
  AccuracyMatrix accuracy;
};

/// Train over `order` in stream batches; after stream batch eval_after[k]
/// (1-based count) evaluate on test_sets[0..k]. eval_after must be strictly
/// increasing with one entry per test set.
inline TrainResult train_run(const TrainConfig& cfg, Network net, const Dataset& data,
                             const std::vector<std::size_t>& order,
                             const std::vector<LabeledBatch>& test_sets,
                             const std::vector<std::size_t>& eval_after) {
  if (eval_after.size() != test_sets.size()) {
    throw ConfigError("train_run: need one evaluation point per test set");
  }
  for (std::size_t k = 1; k < eval_after.size(); ++k) {
    if (eval_after[k] <= eval_after[k - 1]) throw ConfigError("train_run: evaluation points must increase");
  }
  TrainResult res{Trainer(cfg, std::move(net), data.image), {}};
  res.accuracy.num_tasks = static_cast<int>(test_sets.size());
  const auto batches = chunk(order, cfg.stream_batch);
  std::size_t next_eval = 0;
  auto evaluate = [&] {
    std::vector<double> row;
    for (std::size_t j = 0; j <= next_eval; ++j) {
      row.push_back(accuracy(res.trainer.predict(test_sets[j].x), test_sets[j].y));
    }
    res.accuracy.rows.push_back(std::move(row));
    ++next_eval;
  };
  for (std::size_t b = 0; b < batches.size(); ++b) {
    res.trainer.step(data.gather(batches[b]));
    while (next_eval < eval_after.size() && eval_after[next_eval] == b + 1) evaluate();
  }
  // Points past the end of the stream are evaluated on the final model.
  while (next_eval < eval_after.size()) evaluate();
  return res;
}

}  // namespace sawsphere
