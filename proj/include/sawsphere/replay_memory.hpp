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

// Fixed-capacity replay memory filled by reservoir sampling.

#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"
#include "sawsphere/stream.hpp"

namespace sawsphere {

class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, int input_dim, std::uint64_t seed)
      : capacity_(capacity), input_dim_(input_dim), x_(static_cast<Eigen::Index>(capacity), input_dim),
        gen_(seed) {
    if (input_dim < 1) throw ShapeError("memory: input_dim must be >= 1");
    labels_.reserve(capacity);
    ids_.reserve(capacity);
  }

  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] bool empty() const { return labels_.empty(); }
  /// Items offered so far.
  [[nodiscard]] std::uint64_t stream_count() const { return count_; }
  /// Offer index (0-based) of the item in each slot.
  [[nodiscard]] const std::vector<std::uint64_t>& stream_ids() const { return ids_; }
  [[nodiscard]] const std::vector<int>& labels() const { return labels_; }

  /// Vitter's algorithm R, one item at a time: the n-th offer (0-based) is
  /// kept with probability M / (n + 1) in a uniformly chosen slot.
  void offer(const Eigen::RowVectorXd& row, int label) {
    if (row.size() != input_dim_) throw ShapeError("memory: row width mismatch");
    if (labels_.size() < capacity_) {
      x_.row(static_cast<Eigen::Index>(labels_.size())) = row;
      labels_.push_back(label);
      ids_.push_back(count_);
    } else if (capacity_ > 0) {
      std::uniform_int_distribution<std::uint64_t> pick(0, count_);
      const std::uint64_t j = pick(gen_);
      if (j < capacity_) {
        x_.row(static_cast<Eigen::Index>(j)) = row;
        labels_[j] = label;
        ids_[j] = count_;
      }
    }
    ++count_;
  }

  void update(const LabeledBatch& batch) {
    for (Eigen::Index i = 0; i < batch.x.rows(); ++i) offer(batch.x.row(i), batch.y[i]);
  }

  /// min(k, size) samples uniformly without replacement, in random order.
  template <class Generator>
  [[nodiscard]] LabeledBatch retrieve(std::size_t k, Generator& gen) const {
    std::vector<std::size_t> slots(size());
    std::iota(slots.begin(), slots.end(), 0);
    const std::size_t take = std::min(k, slots.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
      std::swap(slots[i], slots[pick(gen)]);
    }
    slots.resize(take);
    return gather(slots);
  }

  /// Everything stored, in slot order.
  [[nodiscard]] LabeledBatch dump() const {
    std::vector<std::size_t> slots(size());
    std::iota(slots.begin(), slots.end(), 0);
    return gather(slots);
  }

  /// slot,stream_id,label,x_0,...,x_{D-1}
  void write_csv(std::ostream& os) const {
    os << "slot,stream_id,label";
    for (int j = 0; j < input_dim_; ++j) os << ",x_" << j;
    os << '\n';
    char buf[64];
    for (std::size_t s = 0; s < size(); ++s) {
      os << s << ',' << ids_[s] << ',' << labels_[s];
      for (int j = 0; j < input_dim_; ++j) {
        const auto r = std::to_chars(buf, buf + sizeof(buf), x_(static_cast<Eigen::Index>(s), j));
        os << ',' << std::string_view(buf, r.ptr - buf);
      }
      os << '\n';
    }
  }

 private:
  [[nodiscard]] LabeledBatch gather(const std::vector<std::size_t>& slots) const {
    LabeledBatch b;
    b.x.resize(static_cast<Eigen::Index>(slots.size()), input_dim_);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      b.x.row(static_cast<Eigen::Index>(i)) = x_.row(static_cast<Eigen::Index>(slots[i]));
      b.y.push_back(labels_[slots[i]]);
    }
    return b;
  }

  std::size_t capacity_;
  int input_dim_;
  Eigen::MatrixXd x_;
  std::vector<int> labels_;
  std::vector<std::uint64_t> ids_;
  std::uint64_t count_ = 0;
  std::mt19937_64 gen_;
};

}  // namespace sawsphere
