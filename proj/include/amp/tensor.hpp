// Copyright 2026 The amp-motion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AMP__TENSOR_HPP_
#define AMP__TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace amp
{

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape & shape);
std::string shape_to_string(const Shape & shape);

namespace detail
{
struct Node
{
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad{false};
  const char * op{"leaf"};
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void()> backward;

  void ensure_grad()
  {
    if (grad.size() != value.size()) {
      grad.assign(value.size(), 0.0);
    }
  }
};
}  // namespace detail

/**
 * @brief Dense row-major f64 tensor with reverse-mode autodiff.
 *
 * A Tensor is a shared handle: copies alias the same storage and graph node.
 * Every op below records its backward rule on the result node when grad mode
 * is on and at least one input requires grad; the recorded graph is the tape.
 */
class Tensor
{
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape & shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;
  /// Leading dimension of a rank-2 tensor.
  std::size_t rows() const { return dim(0); }
  /// Trailing dimension of a rank-2 tensor.
  std::size_t cols() const { return dim(1); }

  std::span<const double> data() const;
  /// Writable storage. Mutating a tensor that already feeds a recorded graph is undefined.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, detached from the graph (shares nothing).
  Tensor detach() const;
  const char * op_name() const;

  detail::Node * node() const { return node_.get(); }
  const std::shared_ptr<detail::Node> & node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<detail::Node> node_;
};

/// True unless a NoGradGuard is active on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

/**
 * @brief Back-propagates from a scalar loss.
 *
 * Visits the recorded ops in reverse topological order, each exactly once.
 * Gradients of intermediate nodes are reset at the start of every call while
 * leaf gradients accumulate across calls until zero_grad().
 * Throws UsageError if `loss` is not a single element.
 */
void backward(const Tensor & loss);

/// Number of distinct ops reachable from `root` (for tape inspection in tests).
std::size_t tape_size(const Tensor & root);

// --- elementwise / shape ops -------------------------------------------------

Tensor add(const Tensor & a, const Tensor & b);
Tensor sub(const Tensor & a, const Tensor & b);
Tensor mul(const Tensor & a, const Tensor & b);
Tensor scale(const Tensor & a, double s);
/// x[m, n] + b[n] broadcast over rows.
Tensor add_bias(const Tensor & x, const Tensor & b);
Tensor relu(const Tensor & x);
/// Multiplies row r of a rank-2 tensor by the constant factors[r].
Tensor scale_rows(const Tensor & x, std::span<const double> factors);
Tensor sum(const Tensor & x);
Tensor mean(const Tensor & x);
Tensor reshape(const Tensor & x, Shape shape);
/// Concatenates rank-2 tensors with equal row counts along columns.
Tensor concat_cols(std::span<const Tensor> parts);
/// Concatenates rank-2 tensors with equal column counts along rows.
Tensor concat_rows(std::span<const Tensor> parts);
/// out[i] = x[indices[i]] (rank-2, row gather; duplicates allowed).
Tensor gather_rows(const Tensor & x, std::span<const std::size_t> indices);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor & x, std::size_t begin, std::size_t end);

// --- linear algebra ----------------------------------------------------------

/// a[m, k] @ b[k, n]. Each output element sums over k in ascending order,
/// independent of m, so a row's result never depends on the batch it is in.
Tensor matmul(const Tensor & a, const Tensor & b);

// --- normalization / probability --------------------------------------------

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor & x, std::size_t axis);
/// Row-wise layer normalization over the last dimension of a rank-2 tensor.
Tensor layer_norm(const Tensor & x, const Tensor & gamma, const Tensor & beta, double eps = 1e-5);

/**
 * @brief Mean cross-entropy of row-wise logits against integer labels.
 *
 * Rows with a negative label are ignored. Returns 0 when no row is labelled.
 */
Tensor cross_entropy(const Tensor & logits, std::span<const int> labels);

/**
 * @brief Weighted smooth-L1 (Huber, transition at `delta`): sum_i w_i * huber(pred_i - target_i).
 *
 * Entries with zero weight contribute exactly nothing (masked), including to gradients.
 */
Tensor smooth_l1(
  const Tensor & pred, std::span<const double> target, std::span<const double> weights,
  double delta = 1.0);

// --- attention ---------------------------------------------------------------

/**
 * @brief Segment-wise multi-head scaled dot-product attention over explicit pairs.
 *
 * Row p of q/k/v describes one (query, key) pair; pairs of query i occupy rows
 * [offsets[i], offsets[i + 1]). Scores are q_p . k_p / sqrt(d_head) per head,
 * softmax-normalized within each query segment, and v rows are averaged with
 * those weights. Output is [offsets.size() - 1, D]. A query with no pairs
 * (fully masked) outputs zeros.
 */
Tensor pair_attention(
  const Tensor & q, const Tensor & k, const Tensor & v, std::span<const std::size_t> offsets,
  std::size_t num_heads);

/**
 * @brief Rotary position embedding applied per head.
 *
 * For row r, head h, coordinate pair (2i, 2i+1) of the head slice is rotated by
 * positions[r] * base^(-2i / head_dim). Throws ConfigError on odd head_dim.
 */
Tensor rope(
  const Tensor & x, std::span<const double> positions, std::size_t head_dim, double base = 10000.0);

/// Single-head RoPE: x is [positions, head_dim].
inline Tensor rope_rotate(const Tensor & x, std::span<const double> positions, double base = 10000.0)
{
  return rope(x, positions, x.cols(), base);
}

/// Column-wise max over row segments [offsets[i], offsets[i + 1]); empty segments give zeros.
Tensor segment_max(const Tensor & x, std::span<const std::size_t> offsets);

/// Inverted dropout (Bernoulli keep mask scaled by 1/(1-rate)); identity when rate == 0.
Tensor dropout(const Tensor & x, double rate, Rng & rng);

}  // namespace amp

#endif  // AMP__TENSOR_HPP_
