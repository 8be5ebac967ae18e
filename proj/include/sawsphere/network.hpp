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

// Small MLP encoder z = psi(phi(x)) with a sphere-normalized output, manual
// reverse-mode gradients and Adam.
//
// Batches are row-major in the mathematical sense: x is b x D, one sample per
// row. The trunk phi is layers [0, split), the head psi is [split, end). The
// trunk output h is the representation used at evaluation time.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "sawsphere/errors.hpp"

namespace sawsphere {

enum class LayerKind { dense, relu, l2_normalize };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in = 0;  ///< dense only
  int out = 0;
};

/// Norms below this are clamped before dividing.
inline constexpr double kNormFloor = 1e-8;

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  int split = 0;  ///< index of the first head layer

  /// dense+relu blocks for the trunk (ReLU after the last trunk layer too),
  /// then dense+relu for the hidden head layers, a final dense to `latent`
  /// and the normalization.
  static NetworkSpec mlp(int input_dim, const std::vector<int>& trunk,
                         const std::vector<int>& head_hidden, int latent) {
    NetworkSpec s;
    s.input_dim = input_dim;
    int width = input_dim;
    for (int w : trunk) {
      s.layers.push_back({LayerKind::dense, width, w});
      s.layers.push_back({LayerKind::relu, 0, 0});
      width = w;
    }
    s.split = static_cast<int>(s.layers.size());
    for (int w : head_hidden) {
      s.layers.push_back({LayerKind::dense, width, w});
      s.layers.push_back({LayerKind::relu, 0, 0});
      width = w;
    }
    s.layers.push_back({LayerKind::dense, width, latent});
    s.layers.push_back({LayerKind::l2_normalize, 0, 0});
    s.validate();
    return s;
  }

  /// Width of the activations entering layer `index`.
  [[nodiscard]] int width_before(int index) const {
    int w = input_dim;
    for (int k = 0; k < index; ++k) {
      if (layers[k].kind == LayerKind::dense) w = layers[k].out;
    }
    return w;
  }

  [[nodiscard]] int latent_dim() const { return width_before(static_cast<int>(layers.size())); }
  [[nodiscard]] int representation_dim() const { return width_before(split); }

  void validate() const {
    if (input_dim < 1) throw ShapeError("network: input_dim must be >= 1");
    if (layers.empty() || layers.back().kind != LayerKind::l2_normalize) {
      throw ShapeError("network: last layer must be l2_normalize");
    }
    if (split < 0 || split >= static_cast<int>(layers.size())) {
      throw ShapeError("network: split index out of range");
    }
    int w = input_dim;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.kind == LayerKind::dense) {
        if (l.in != w || l.out < 1) {
          throw ShapeError("network: dense layer " + std::to_string(k) + " expects " +
                           std::to_string(w) + " inputs");
        }
        w = l.out;
      }
    }
  }
};

/// One matrix per parameter block: W (out x in) then b (out x 1) for each
/// dense layer in order.
using Parameters = std::vector<Eigen::MatrixXd>;

struct Tape {
  std::vector<Eigen::MatrixXd> acts;  ///< acts[k] is the input of layer k
  std::vector<Eigen::VectorXd> norms;  ///< row norms before each l2_normalize
  std::uint64_t version = 0;
  const void* owner = nullptr;
};

struct ForwardResult {
  Eigen::MatrixXd z;  ///< b x d, unit rows
  Eigen::MatrixXd h;  ///< b x d_h trunk output
  Tape tape;
};

class Network {
 public:
  Network() = default;

  /// Kaiming-uniform weights U(-sqrt(6 / fan_in), sqrt(6 / fan_in)) and
  /// biases U(-1 / sqrt(fan_in), 1 / sqrt(fan_in)). Nonzero biases keep a
  /// row whose ReLUs are all off away from the zero vector.
  Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 gen(seed);
    for (const auto& l : spec_.layers) {
      if (l.kind != LayerKind::dense) continue;
      const double bound = std::sqrt(6.0 / l.in);
      std::uniform_real_distribution<double> unif(-bound, bound);
      Eigen::MatrixXd w(l.out, l.in);
      for (int i = 0; i < l.out; ++i)
        for (int j = 0; j < l.in; ++j) w(i, j) = unif(gen);
      std::uniform_real_distribution<double> bias_unif(-1.0 / std::sqrt(l.in), 1.0 / std::sqrt(l.in));
      Eigen::MatrixXd b(l.out, 1);
      for (int i = 0; i < l.out; ++i) b(i, 0) = bias_unif(gen);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  Network(NetworkSpec spec, Parameters params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    check_shapes(params_);
  }

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] const Parameters& params() const { return params_; }
  [[nodiscard]] std::uint64_t version() const { return version_; }

  /// Mutable access invalidates outstanding tapes.
  Parameters& mutable_params() {
    ++version_;
    return params_;
  }

  void check_shapes(const Parameters& p) const {
    std::size_t idx = 0;
    for (const auto& l : spec_.layers) {
      if (l.kind != LayerKind::dense) continue;
      if (p.size() < idx + 2 || p[idx].rows() != l.out ||
          p[idx].cols() != l.in || p[idx + 1].rows() != l.out || p[idx + 1].cols() != 1) {
        throw ShapeError("network: parameter block " + std::to_string(idx) + " has wrong shape");
      }
      idx += 2;
    }
    if (idx != p.size()) throw ShapeError("network: wrong number of parameter blocks");
  }

  [[nodiscard]] ForwardResult forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != spec_.input_dim) {
      throw ShapeError("network: input has " + std::to_string(x.cols()) + " columns, expected " +
                       std::to_string(spec_.input_dim));
    }
    ForwardResult out;
    out.tape.version = version_;
    out.tape.owner = this;
    Eigen::MatrixXd a = x;
    std::size_t p = 0;
    for (std::size_t k = 0; k < spec_.layers.size(); ++k) {
      if (static_cast<int>(k) == spec_.split) out.h = a;
      out.tape.acts.push_back(a);
      switch (spec_.layers[k].kind) {
        case LayerKind::dense:
          a = (a * params_[p].transpose()).rowwise() + params_[p + 1].col(0).transpose();
          p += 2;
          break;
        case LayerKind::relu:
          a = a.cwiseMax(0.0);
          break;
        case LayerKind::l2_normalize: {
          Eigen::VectorXd n = a.rowwise().norm();
          for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) /= std::max(n(i), kNormFloor);
          out.tape.norms.push_back(std::move(n));
          break;
        }
      }
    }
    out.tape.acts.push_back(a);
    out.z = std::move(a);
    return out;
  }

  /// Trunk output only.
  [[nodiscard]] Eigen::MatrixXd represent(const Eigen::MatrixXd& x) const {
    if (x.cols() != spec_.input_dim) throw ShapeError("network: input width mismatch");
    Eigen::MatrixXd a = x;
    std::size_t p = 0;
    for (int k = 0; k < spec_.split; ++k) {
      if (spec_.layers[k].kind == LayerKind::dense) {
        a = (a * params_[p].transpose()).rowwise() + params_[p + 1].col(0).transpose();
        p += 2;
      } else if (spec_.layers[k].kind == LayerKind::relu) {
        a = a.cwiseMax(0.0);
      } else {
        Eigen::VectorXd n = a.rowwise().norm();
        for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) /= std::max(n(i), kNormFloor);
      }
    }
    return a;
  }

  /// Parameter gradients of sum_i grad_z_i . z_i.
  [[nodiscard]] Parameters backward(const Tape& tape, const Eigen::MatrixXd& grad_z) const {
    if (tape.owner != this || tape.version != version_) {
      throw StaleTapeError("network: tape does not match the current parameters");
    }
    const auto& z = tape.acts.back();
    if (grad_z.rows() != z.rows() || grad_z.cols() != z.cols()) {
      throw ShapeError("network: grad_z shape does not match the output");
    }
    Parameters grads(params_.size());
    Eigen::MatrixXd g = grad_z;
    std::size_t p = params_.size();
    std::size_t norm_idx = tape.norms.size();
    for (std::size_t k = spec_.layers.size(); k-- > 0;) {
      const Eigen::MatrixXd& in = tape.acts[k];
      switch (spec_.layers[k].kind) {
        case LayerKind::dense: {
          p -= 2;
          grads[p] = g.transpose() * in;
          grads[p + 1] = g.colwise().sum().transpose();
          g = g * params_[p];
          break;
        }
        case LayerKind::relu:
          g = g.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
          break;
        case LayerKind::l2_normalize: {
          const Eigen::VectorXd& n = tape.norms[--norm_idx];
          const Eigen::MatrixXd& out = tape.acts[k + 1];
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            if (n(i) > kNormFloor) {
              // (I - z z^T) / |a|
              g.row(i) = (g.row(i) - g.row(i).dot(out.row(i)) * out.row(i)) / n(i);
            } else {
              g.row(i) /= kNormFloor;
            }
          }
          break;
        }
      }
    }
    return grads;
  }

  /// Text checkpoint:
  ///   sawsphere-network 1
  ///   input <D> split <S> layers <N>
  ///   one line per layer: "dense <in> <out>" | "relu" | "l2_normalize"
  ///   one line per parameter block: "<rows> <cols>" then row-major values
  /// Values use the shortest round-trip decimal form. Leading lines that
  /// start with '#' are ignored by load().
  void save(std::ostream& os) const {
    os << "sawsphere-network 1\n";
    os << "input " << spec_.input_dim << " split " << spec_.split << " layers "
       << spec_.layers.size() << "\n";
    for (const auto& l : spec_.layers) {
      switch (l.kind) {
        case LayerKind::dense: os << "dense " << l.in << " " << l.out << "\n"; break;
        case LayerKind::relu: os << "relu\n"; break;
        case LayerKind::l2_normalize: os << "l2_normalize\n"; break;
      }
    }
    char buf[64];
    for (const auto& m : params_) {
      os << m.rows() << " " << m.cols();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
          os << ' ' << std::string_view(buf, res.ptr - buf);
        }
      }
      os << "\n";
    }
  }

  static Network load(std::istream& is) {
    while (is.peek() == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "sawsphere-network" || version != 1) {
      throw FormatError("network checkpoint: bad header");
    }
    NetworkSpec spec;
    std::string k1, k2, k3;
    std::size_t n = 0;
    if (!(is >> k1 >> spec.input_dim >> k2 >> spec.split >> k3 >> n) || k1 != "input" ||
        k2 != "split" || k3 != "layers") {
      throw FormatError("network checkpoint: bad shape line");
    }
    int dense = 0;
    for (std::size_t k = 0; k < n; ++k) {
      std::string kind;
      if (!(is >> kind)) throw FormatError("network checkpoint: truncated layer list");
      if (kind == "dense") {
        LayerSpec l{LayerKind::dense, 0, 0};
        if (!(is >> l.in >> l.out)) throw FormatError("network checkpoint: bad dense layer");
        spec.layers.push_back(l);
        ++dense;
      } else if (kind == "relu") {
        spec.layers.push_back({LayerKind::relu, 0, 0});
      } else if (kind == "l2_normalize") {
        spec.layers.push_back({LayerKind::l2_normalize, 0, 0});
      } else {
        throw FormatError("network checkpoint: unknown layer '" + kind + "'");
      }
    }
    spec.validate();
    Parameters params;
    for (int b = 0; b < 2 * dense; ++b) {
      Eigen::Index rows = 0, cols = 0;
      if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
        throw FormatError("network checkpoint: bad parameter block header");
      }
      Eigen::MatrixXd m(rows, cols);
      std::string tok;
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          if (!(is >> tok)) throw FormatError("network checkpoint: truncated parameters");
          const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), m(i, j));
          if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            throw FormatError("network checkpoint: bad number '" + tok + "'");
          }
        }
      }
      params.push_back(std::move(m));
    }
    return Network(std::move(spec), std::move(params));
  }

 private:
  NetworkSpec spec_;
  Parameters params_;
  std::uint64_t version_ = 0;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Parameters m;
  Parameters v;
};

/// One bias-corrected Adam update in place.
inline void adam_step(AdamState& s, Parameters& params, const Parameters& grads) {
  if (grads.size() != params.size()) throw ShapeError("adam: gradient count mismatch");
  if (s.m.empty()) {
    for (const auto& p : params) {
      s.m.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      s.v.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
  }
  if (s.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].rows() != params[k].rows() || grads[k].cols() != params[k].cols() ||
        s.m[k].rows() != params[k].rows() || s.m[k].cols() != params[k].cols()) {
      throw ShapeError("adam: shape mismatch in block " + std::to_string(k));
    }
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * grads[k];
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * grads[k].cwiseProduct(grads[k]);
    params[k].array() -=
        s.lr * (s.m[k].array() / c1) / ((s.v[k].array() / c2).sqrt() + s.eps);
  }
}

inline void adam_step(AdamState& s, Network& net, const Parameters& grads) {
  adam_step(s, net.mutable_params(), grads);
}

}  // namespace sawsphere
