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

#ifndef AMP__NN_HPP_
#define AMP__NN_HPP_

#include "amp/geometry.hpp"
#include "amp/random.hpp"
#include "amp/tensor.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amp
{

/**
 * @brief Ordered registry of named trainable tensors.
 *
 * Registration order is the canonical order for checkpoints and the optimizer,
 * so two stores built by the same code are interchangeable.
 */
class ParamStore
{
public:
  /// Registers a Xavier-uniform initialized [fan_in, fan_out] matrix.
  Tensor add_matrix(const std::string & name, std::size_t fan_in, std::size_t fan_out, Rng & rng);
  /// Registers a tensor filled with `value`.
  Tensor add_constant(const std::string & name, Shape shape, double value);
  /// Registers a tensor with N(0, stddev^2) entries.
  Tensor add_normal(const std::string & name, Shape shape, double stddev, Rng & rng);

  const std::vector<std::pair<std::string, Tensor>> & items() const { return items_; }
  Tensor get(const std::string & name) const;
  bool contains(const std::string & name) const { return index_.count(name) != 0; }
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

private:
  Tensor add(const std::string & name, Tensor t);

  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

/// Affine map x[m, in] -> x W + b. `bias` may be undefined.
struct Linear
{
  Tensor weight;  // [in, out]
  Tensor bias;    // [out] or undefined

  static Linear create(
    ParamStore & store, const std::string & name, std::size_t in, std::size_t out, Rng & rng,
    bool with_bias = true);
  Tensor forward(const Tensor & x) const;
  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
};

enum class Activation { kRelu, kIdentity };

/// Affine + activation per layer; the last layer stays linear.
Tensor mlp_forward(const Tensor & x, std::span<const Linear> layers, Activation activation = Activation::kRelu);

struct Mlp
{
  std::vector<Linear> layers;

  /// widths = {in, hidden..., out}.
  static Mlp create(ParamStore & store, const std::string & name, const std::vector<std::size_t> & widths, Rng & rng);
  Tensor forward(const Tensor & x) const { return mlp_forward(x, layers); }
  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }
};

struct LayerNorm
{
  Tensor gamma;
  Tensor beta;
  double eps{1e-5};

  static LayerNorm create(ParamStore & store, const std::string & name, std::size_t width);
  Tensor forward(const Tensor & x) const { return layer_norm(x, gamma, beta, eps); }
};

/// Boolean [queries, keys] mask; true means the key may be attended.
struct AttentionMask
{
  std::size_t queries{0};
  std::size_t keys{0};
  std::vector<bool> allowed;

  bool at(std::size_t q, std::size_t k) const { return allowed[q * keys + k]; }
};

/// Scaled dot-product attention between dense q[Nq, D] and k/v[Nk, D] rows, no projections.
Tensor scaled_dot_attention(
  const Tensor & q, const Tensor & k, const Tensor & v, std::size_t num_heads,
  const AttentionMask * mask = nullptr);

/**
 * @brief Standard multi-head attention: input projections, per-head scaled
 * dot-product, concatenated heads, output projection.
 *
 * Fully-masked query rows produce zeros (the output projection carries no bias).
 */
struct MultiHeadAttention
{
  Linear q_proj;
  Linear k_proj;
  Linear v_proj;
  Linear out_proj;
  std::size_t num_heads{1};

  static MultiHeadAttention create(
    ParamStore & store, const std::string & name, std::size_t width, std::size_t num_heads, Rng & rng);
  Tensor forward(
    const Tensor & q, const Tensor & k, const Tensor & v, const AttentionMask * mask = nullptr) const;
};

/**
 * @brief Explicit (query, key) pair list grouped by query.
 *
 * Pairs of query i occupy [offsets[i], offsets[i + 1]); within a group the
 * order is the order keys were appended.
 */
struct PairList
{
  std::vector<std::size_t> query;
  std::vector<std::size_t> key;
  std::vector<std::size_t> offsets{0};

  std::size_t num_queries() const { return offsets.size() - 1; }
  std::size_t size() const { return key.size(); }
  void add(std::size_t q, std::size_t k)
  {
    query.push_back(q);
    key.push_back(k);
  }
  /// Closes the group of the next query index.
  void close_query() { offsets.push_back(key.size()); }
};

/// Which part of the projected query/key RoPE rotates.
enum class RopeScope {
  /// Whole projected [feature; position-embedding] vector.
  kFull,
  /// Only the feature projection; the relative spatial term is added afterwards.
  kFeatureOnly,
};

struct RopeSettings
{
  std::span<const double> query_positions;  // one per query row
  std::span<const double> key_positions;    // one per key row
  double base{10000.0};
  RopeScope scope{RopeScope::kFull};
};

/**
 * @brief Attention where each (i, j) pair carries its own relative position embedding.
 *
 * Q_ij = Wq [x_i (+ query_offset_i); Pos_{i;j}],  K_ij = Wk [y_j; Pos_{j;i}],
 * V_ij = Wv [y_j; Pos_{j;i}]; the concatenations are realized as split weights.
 * Output is projected by a bias-free W_o so empty pair groups give zeros.
 */
struct RelativeAttention
{
  Linear q_feat;
  Linear q_pos;
  Linear k_feat;
  Linear k_pos;
  Linear v_feat;
  Linear v_pos;
  Linear out_proj;
  std::size_t num_heads{1};

  static RelativeAttention create(
    ParamStore & store, const std::string & name, std::size_t width, std::size_t pos_width,
    std::size_t num_heads, Rng & rng);

  /**
   * @param query_feats [Nq, H]
   * @param key_feats [Nk, H]
   * @param pos_qk [P, H_pos] embedding of the transform from query i to key j, per pair
   * @param pos_kq [P, H_pos] embedding of the transform from key j to query i, per pair
   * @param query_offset optional [Nq, H] added to query features before projection
   * @param rope optional rotary encoding of Q and K
   */
  Tensor forward(
    const Tensor & query_feats, const Tensor & key_feats, const PairList & pairs,
    const Tensor & pos_qk, const Tensor & pos_kq, const Tensor * query_offset = nullptr,
    const RopeSettings * rope = nullptr) const;

  std::size_t width() const { return out_proj.out_features(); }
};

/**
 * @brief Relative spatial position embedding MLP_pos(Fourier(delta)).
 */
struct SpatialPosEmbedding
{
  std::vector<double> frequencies;
  Mlp mlp;
  DeltaMode mode{DeltaMode::kLocal};

  static SpatialPosEmbedding create(
    ParamStore & store, const std::string & name, std::vector<double> frequencies,
    std::size_t hidden, std::size_t out, DeltaMode mode, Rng & rng);

  /// Embeds a batch of transforms into [n, out].
  Tensor embed(std::span<const RelativeTransform> rel) const;
  /// Embeds the transforms src_i -> dst_i.
  Tensor embed_pairs(std::span<const Pose2D> src, std::span<const Pose2D> dst) const;
  std::size_t out_features() const { return mlp.out_features(); }
};

/**
 * @brief Pos_{i;j} for one transform as a [1, out] tensor (differentiable in the MLP weights).
 *
 * Throws ShapeError when the MLP input width differs from the Fourier width.
 */
Tensor spatial_pos_embed(
  const RelativeTransform & rel, std::span<const double> frequencies, const Mlp & mlp);

/// Builds the fixed Fourier feature matrix [n, 6 * |freqs|].
Tensor fourier_features(std::span<const RelativeTransform> rel, std::span<const double> frequencies);

}  // namespace amp

#endif  // AMP__NN_HPP_
