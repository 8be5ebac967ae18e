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

// Class-incremental streams: datasets, task schedules, clear and blurry
// orderings, multi-view augmentation, CIFAR-10 ingestion and synthetic blobs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"

namespace sawsphere {

/// Channel-major image layout of a flattened row (C planes of H x W).
struct ImageShape {
  int channels = 3;
  int height = 32;
  int width = 32;
  [[nodiscard]] int size() const { return channels * height * width; }
};

/// Rows of inputs with integer labels.
struct LabeledBatch {
  Eigen::MatrixXd x;
  std::vector<int> y;

  [[nodiscard]] Eigen::Index size() const { return x.rows(); }
  [[nodiscard]] bool empty() const { return x.rows() == 0; }
};

struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
  int num_classes = 0;
  std::optional<ImageShape> image;

  [[nodiscard]] std::size_t size() const { return y.size(); }
  [[nodiscard]] int input_dim() const { return static_cast<int>(x.cols()); }

  [[nodiscard]] LabeledBatch gather(const std::vector<std::size_t>& idx) const {
    LabeledBatch b;
    b.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    b.y.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      b.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      b.y.push_back(y[idx[i]]);
    }
    return b;
  }
};

/// Stack rows of a onto rows of b.
inline LabeledBatch concat(const LabeledBatch& a, const LabeledBatch& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.x.cols() != b.x.cols()) throw ShapeError("concat: input widths differ");
  LabeledBatch out;
  out.x.resize(a.x.rows() + b.x.rows(), a.x.cols());
  out.x << a.x, b.x;
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

// ---------------------------------------------------------------------------
// Task schedule
// ---------------------------------------------------------------------------

/// Task k owns labels label_permutation[k * c, (k + 1) * c) with c classes per task.
struct TaskSchedule {
  int num_tasks = 0;
  int classes_per_task = 0;
  std::vector<int> label_permutation;
  std::uint64_t seed = 0;

  /// Schedule over the first num_tasks * classes_per_task labels of
  /// [0, num_labels). With random_order the labels are shuffled first.
  static TaskSchedule make(int num_labels, int num_tasks, int classes_per_task, bool random_order,
                           std::uint64_t seed) {
    if (num_tasks < 1 || classes_per_task < 1) {
      throw ConfigError("schedule: tasks and classes per task must be >= 1");
    }
    if (num_tasks * classes_per_task > num_labels) {
      throw ConfigError("schedule: " + std::to_string(num_tasks) + " tasks x " +
                        std::to_string(classes_per_task) + " classes exceeds " +
                        std::to_string(num_labels) + " labels");
    }
    TaskSchedule s;
    s.num_tasks = num_tasks;
    s.classes_per_task = classes_per_task;
    s.seed = seed;
    std::vector<int> labels(num_labels);
    std::iota(labels.begin(), labels.end(), 0);
    if (random_order) {
      std::mt19937_64 gen(seed);
      std::shuffle(labels.begin(), labels.end(), gen);
    }
    labels.resize(static_cast<std::size_t>(num_tasks * classes_per_task));
    s.label_permutation = std::move(labels);
    return s;
  }

  [[nodiscard]] int num_labels() const { return num_tasks * classes_per_task; }

  [[nodiscard]] std::vector<int> classes_of(int task) const {
    if (task < 0 || task >= num_tasks) throw DomainError("schedule: task out of range");
    return {label_permutation.begin() + task * classes_per_task,
            label_permutation.begin() + (task + 1) * classes_per_task};
  }

  /// Task owning `label`, or -1 when the label is not scheduled.
  [[nodiscard]] int task_of(int label) const {
    const auto it = std::find(label_permutation.begin(), label_permutation.end(), label);
    if (it == label_permutation.end()) return -1;
    return static_cast<int>(it - label_permutation.begin()) / classes_per_task;
  }
};

// ---------------------------------------------------------------------------
// Orderings
// ---------------------------------------------------------------------------

/// Dataset indices task by task, shuffled within each task. Samples whose
/// label is not scheduled are left out.
inline std::vector<std::size_t> make_clear_stream(const Dataset& ds, const TaskSchedule& schedule,
                                                  std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> per_task(schedule.num_tasks);
  std::vector<std::size_t> label_count(static_cast<std::size_t>(std::max(ds.num_classes, 0)), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int t = schedule.task_of(ds.y[i]);
    if (t >= 0) per_task[t].push_back(i);
    if (ds.y[i] >= 0 && ds.y[i] < ds.num_classes) ++label_count[ds.y[i]];
  }
  for (int label : schedule.label_permutation) {
    if (label >= ds.num_classes || label_count[label] == 0) {
      throw DomainError("stream: scheduled class " + std::to_string(label) +
                        " has no samples in the dataset");
    }
  }
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> out;
  for (auto& idx : per_task) {
    std::shuffle(idx.begin(), idx.end(), gen);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

namespace detail {

// Fenwick tree over 0/1 flags with k-th one lookup.
class OrderStatisticSet {
 public:
  explicit OrderStatisticSet(std::size_t n) : tree_(n + 1, 0), n_(n) {
    for (std::size_t i = 1; i <= n; ++i) {
      tree_[i] += 1;
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n) tree_[parent] += tree_[i];
    }
    top_ = 1;
    while (top_ * 2 <= n_) top_ *= 2;
  }

  void erase(std::size_t pos) {
    for (std::size_t i = pos + 1; i <= n_; i += i & (~i + 1)) --tree_[i];
  }

  /// Position of the k-th (0-based) remaining element.
  [[nodiscard]] std::size_t kth(std::size_t k) const {
    std::size_t pos = 0;
    std::int64_t rem = static_cast<std::int64_t>(k) + 1;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      if (pos + step <= n_ && tree_[pos + step] < rem) {
        pos += step;
        rem -= tree_[pos];
      }
    }
    return pos;
  }

 private:
  std::vector<std::int64_t> tree_;
  std::size_t n_;
  std::size_t top_ = 1;
};

}  // namespace detail

/// Blurry task boundaries: repeatedly draw i ~ HalfNormal(sigma) and move
/// the element at index min(floor(i), remaining - 1) of what is left of the
/// clear sequence to the output.
template <class T>
std::vector<T> blurry_shuffle(const std::vector<T>& clear, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("blurry_shuffle: sigma must be >= 0");
  std::vector<T> out;
  out.reserve(clear.size());
  if (clear.empty()) return out;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  detail::OrderStatisticSet remaining(clear.size());
  for (std::size_t left = clear.size(); left > 0; --left) {
    const double draw = std::abs(normal(gen)) * sigma;
    const double capped = std::min(std::floor(draw), static_cast<double>(left - 1));
    const std::size_t pos = remaining.kth(static_cast<std::size_t>(capped));
    out.push_back(clear[pos]);
    remaining.erase(pos);
  }
  return out;
}

/// Fraction of task-b samples that appear before the last task-a sample.
inline double task_overlap_fraction(const std::vector<int>& task_ids, int a, int b) {
  std::size_t last_a = 0;
  bool seen_a = false;
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    if (task_ids[i] == a) {
      last_a = i;
      seen_a = true;
    }
  }
  std::size_t total_b = 0, early_b = 0;
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    if (task_ids[i] != b) continue;
    ++total_b;
    if (seen_a && i < last_a) ++early_b;
  }
  return total_b == 0 ? 0.0 : static_cast<double>(early_b) / static_cast<double>(total_b);
}

/// Task id of every position of an ordering.
inline std::vector<int> task_ids_of(const Dataset& ds, const TaskSchedule& s,
                                    const std::vector<std::size_t>& order) {
  std::vector<int> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(s.task_of(ds.y[i]));
  return out;
}

/// Consecutive chunks of `batch_size` positions; the last may be shorter.
inline std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("stream batch size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
  // Vector inputs.
  double noise_std = 0.0;
  double scale_jitter = 0.0;  ///< x *= U(1 - s, 1 + s)
  double dropout = 0.0;       ///< each coordinate zeroed with this probability
  // Image inputs (used when the dataset carries an ImageShape).
  int crop_padding = 4;
  bool horizontal_flip = true;
};

class Augmenter {
 public:
  Augmenter(AugmentConfig cfg, std::optional<ImageShape> image) : cfg_(cfg), image_(image) {
    if (cfg_.noise_std < 0 || cfg_.scale_jitter < 0 || cfg_.scale_jitter >= 1 || cfg_.dropout < 0 ||
        cfg_.dropout >= 1 || cfg_.crop_padding < 0) {
      throw ConfigError("augmentation parameters out of range");
    }
  }

  template <class Generator>
  [[nodiscard]] Eigen::RowVectorXd apply(const Eigen::RowVectorXd& row, Generator& gen) const {
    return image_ ? apply_image(row, gen) : apply_vector(row, gen);
  }

 private:
  template <class Generator>
  Eigen::RowVectorXd apply_vector(const Eigen::RowVectorXd& row, Generator& gen) const {
    Eigen::RowVectorXd out = row;
    if (cfg_.scale_jitter > 0) {
      std::uniform_real_distribution<double> s(1.0 - cfg_.scale_jitter, 1.0 + cfg_.scale_jitter);
      out *= s(gen);
    }
    if (cfg_.noise_std > 0) {
      std::normal_distribution<double> n(0.0, cfg_.noise_std);
      for (Eigen::Index j = 0; j < out.size(); ++j) out(j) += n(gen);
    }
    if (cfg_.dropout > 0) {
      std::bernoulli_distribution drop(cfg_.dropout);
      for (Eigen::Index j = 0; j < out.size(); ++j)
        if (drop(gen)) out(j) = 0.0;
    }
    return out;
  }

  // Random crop of the reflect-padded image back to its size, then a coin
  // flip for mirroring.
  template <class Generator>
  Eigen::RowVectorXd apply_image(const Eigen::RowVectorXd& row, Generator& gen) const {
    const ImageShape& s = *image_;
    if (row.size() != s.size()) throw ShapeError("augment: row does not match the image shape");
    const int p = cfg_.crop_padding;
    std::uniform_int_distribution<int> off(-p, p);
    const int dy = off(gen), dx = off(gen);
    const bool flip = cfg_.horizontal_flip && std::bernoulli_distribution(0.5)(gen);
    auto reflect = [](int i, int n) {
      if (n == 1) return 0;
      while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
      return i;
    };
    Eigen::RowVectorXd out(row.size());
    for (int c = 0; c < s.channels; ++c) {
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          const int sx = flip ? s.width - 1 - x : x;
          const int yy = reflect(y + dy, s.height), xx = reflect(sx + dx, s.width);
          out((c * s.height + y) * s.width + x) = row((c * s.height + yy) * s.width + xx);
        }
      }
    }
    return out;
  }

  AugmentConfig cfg_;
  std::optional<ImageShape> image_;
};

/// The batch followed by n augmented copies; fresh augmentation parameters
/// for every sample in every view.
template <class Generator>
LabeledBatch multi_view(const LabeledBatch& batch, int n, const Augmenter& aug, Generator& gen) {
  if (n < 0) throw ConfigError("views must be >= 0");
  if (n == 0 || batch.empty()) return batch;
  const Eigen::Index b = batch.x.rows();
  LabeledBatch out;
  out.x.resize(b * (n + 1), batch.x.cols());
  out.x.topRows(b) = batch.x;
  out.y.reserve(static_cast<std::size_t>(b * (n + 1)));
  out.y = batch.y;
  for (int v = 1; v <= n; ++v) {
    for (Eigen::Index i = 0; i < b; ++i) {
      out.x.row(v * b + i) = aug.apply(batch.x.row(i), gen);
      out.y.push_back(batch.y[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Parse records of 1 label byte + 3072 pixel bytes (R, G, B planes of
/// 32 x 32, row-major). Pixels are scaled to [0, 1].
inline Dataset parse_cifar10(const std::vector<unsigned char>& bytes, const std::string& name = "") {
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t offset = bytes.size() / kCifarRecordBytes * kCifarRecordBytes;
    throw FormatError("cifar10 " + name + ": truncated record at byte offset " +
                      std::to_string(offset) + " (file size " + std::to_string(bytes.size()) + ")");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset ds;
  ds.num_classes = 10;
  ds.image = ImageShape{};
  ds.x.resize(static_cast<Eigen::Index>(n), 3072);
  ds.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    if (bytes[base] > 9) {
      throw FormatError("cifar10 " + name + ": label " + std::to_string(bytes[base]) +
                        " out of range at byte offset " + std::to_string(base));
    }
    ds.y[r] = bytes[base];
    for (int j = 0; j < 3072; ++j) {
      ds.x(static_cast<Eigen::Index>(r), j) = bytes[base + 1 + j] / 255.0;
    }
  }
  return ds;
}

inline Dataset load_cifar10_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cifar10: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar10(bytes, path.string());
}

/// Several batch files concatenated in order.
inline Dataset load_cifar10_files(const std::vector<std::filesystem::path>& paths) {
  Dataset out;
  for (const auto& p : paths) {
    Dataset part = load_cifar10_binary(p);
    if (out.size() == 0) {
      out = std::move(part);
      continue;
    }
    Eigen::MatrixXd x(out.x.rows() + part.x.rows(), out.x.cols());
    x << out.x, part.x;
    out.x = std::move(x);
    out.y.insert(out.y.end(), part.y.begin(), part.y.end());
  }
  return out;
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline ChannelStats channel_stats(const Dataset& ds) {
  if (!ds.image) throw DomainError("channel_stats: dataset has no image shape");
  const int c = ds.image->channels, plane = ds.image->height * ds.image->width;
  ChannelStats s;
  for (int k = 0; k < c; ++k) {
    const auto block = ds.x.middleCols(k * plane, plane);
    const double m = block.mean();
    const double var = (block.array() - m).square().mean();
    s.mean.push_back(m);
    s.stddev.push_back(std::sqrt(std::max(var, 1e-24)));
  }
  return s;
}

/// (x - mean_c) / std_c per channel, in place.
inline void standardize(Dataset& ds, const ChannelStats& s) {
  if (!ds.image) throw DomainError("standardize: dataset has no image shape");
  const int plane = ds.image->height * ds.image->width;
  for (int k = 0; k < ds.image->channels; ++k) {
    auto block = ds.x.middleCols(k * plane, plane);
    block.array() = (block.array() - s.mean[k]) / s.stddev[k];
  }
}

/// The first `per_class` samples of each listed class, in dataset order.
inline Dataset subset_per_class(const Dataset& ds, const std::vector<int>& classes, std::size_t per_class) {
  std::vector<std::size_t> idx;
  std::vector<std::size_t> count(static_cast<std::size_t>(ds.num_classes), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int y = ds.y[i];
    if (std::find(classes.begin(), classes.end(), y) == classes.end()) continue;
    if (count[y] < per_class) {
      idx.push_back(i);
      ++count[y];
    }
  }
  Dataset out;
  out.num_classes = ds.num_classes;
  out.image = ds.image;
  const LabeledBatch b = ds.gather(idx);
  out.x = b.x;
  out.y = b.y;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic blobs
// ---------------------------------------------------------------------------

/// Isotropic Gaussian clusters x = c_k + spread * N(0, I) around given centers.
inline Dataset synth_blobs_with_centers(const Eigen::MatrixXd& centers, std::size_t per_class,
                                        double spread, std::uint64_t seed) {
  if (!(spread >= 0.0)) throw DomainError("synth_blobs: spread must be >= 0");
  const auto k = static_cast<int>(centers.rows());
  Dataset ds;
  ds.num_classes = k;
  ds.x.resize(static_cast<Eigen::Index>(per_class) * k, centers.cols());
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::Index row = 0;
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < centers.cols(); ++j) ds.x(row, j) = centers(c, j) + spread * normal(gen);
      ds.y.push_back(c);
    }
  }
  return ds;
}

/// Class centers at unit pairwise distance: scaled columns of a random
/// orthogonal matrix (needs num_classes <= input_dim).
inline Eigen::MatrixXd blob_centers(int num_classes, int input_dim, std::uint64_t seed) {
  if (num_classes < 1 || input_dim < num_classes) {
    throw ConfigError("synth_blobs: need 1 <= num_classes <= input_dim");
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(input_dim, input_dim);
  for (int i = 0; i < input_dim; ++i)
    for (int j = 0; j < input_dim; ++j) g(i, j) = normal(gen);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  return q.leftCols(num_classes).transpose() * std::sqrt(0.5);
}

/// Blobs around blob_centers(num_classes, input_dim, seed). `spread` is in
/// units of the center separation.
inline Dataset synth_blobs(int num_classes, std::size_t per_class, int input_dim, double spread,
                           std::uint64_t seed) {
  return synth_blobs_with_centers(blob_centers(num_classes, input_dim, seed), per_class, spread,
                                  seed ^ 0x9e3779b97f4a7c15ULL);
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

/// position,dataset_index,label,task_id
inline void write_manifest(std::ostream& os, const Dataset& ds, const TaskSchedule& s,
                           const std::vector<std::size_t>& order) {
  os << "position,dataset_index,label,task_id\n";
  for (std::size_t p = 0; p < order.size(); ++p) {
    const int y = ds.y[order[p]];
    os << p << ',' << order[p] << ',' << y << ',' << s.task_of(y) << '\n';
  }
}

/// Class proportions in consecutive windows of `window` positions:
/// window_start,window_size,class_<l>... for every scheduled label l in
/// schedule order.
inline void write_class_proportions(std::ostream& os, const Dataset& ds, const TaskSchedule& s,
                                    const std::vector<std::size_t>& order, std::size_t window) {
  if (window == 0) throw ConfigError("proportion window must be >= 1");
  os << "window_start,window_size";
  for (int l : s.label_permutation) os << ",class_" << l;
  os << '\n';
  for (std::size_t start = 0; start < order.size(); start += window) {
    const std::size_t end = std::min(order.size(), start + window);
    std::vector<std::size_t> counts(s.label_permutation.size(), 0);
    for (std::size_t p = start; p < end; ++p) {
      const auto it = std::find(s.label_permutation.begin(), s.label_permutation.end(), ds.y[order[p]]);
      if (it != s.label_permutation.end()) ++counts[it - s.label_permutation.begin()];
    }
    os << start << ',' << end - start;
    for (std::size_t c : counts) os << ',' << static_cast<double>(c) / static_cast<double>(end - start);
    os << '\n';
  }
}

}  // namespace sawsphere
