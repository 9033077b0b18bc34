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


#ifndef AMP__CONTEXT_ENCODER_HPP_
#define AMP__CONTEXT_ENCODER_HPP_

#include "amp/config.hpp"
#include "amp/nn.hpp"
#include "amp/tokenizer.hpp"

#include <vector>

namespace amp
{

/**
 * @brief For each frame, the k nearest other frames by origin distance.
 *
 * Distances are compared at 1 um resolution and ties go to the smaller index;
 * with fewer than k others, all of them.
 * Each list is ordered by (distance, index).
 */
std::vector<std::vector<std::size_t>> topk_neighbors(std::span<const Pose2D> frames, std::size_t k);

/**
 * @brief Encoded static context of one scene, built once and read-only afterwards.
 */
struct ContextCache
{
  Tensor f_map;        // [N_map, H]
  Tensor f_nonfocal;   // [N_nonfocal, H], fused with the dense future prediction
  Tensor dense_traj;   // [N_nonfocal, T_future * 2], local-frame waypoints
  std::vector<TokenInfo> map_info;
  std::vector<TokenInfo> nonfocal_info;
  /// Neighbor lists over the joint set (map tokens first, then non-focal tokens).
  std::vector<std::vector<std::size_t>> neighbors;
};

struct ContextLayer
{
  RelativeAttention attn;
  LayerNorm norm1;
  Mlp ffn;
  LayerNorm norm2;

  static ContextLayer create(ParamStore & store, const std::string & name, const ModelConfig & c, Rng & rng);
  Tensor forward(
    const Tensor & x, const PairList & pairs, const Tensor & pos_qk, const Tensor & pos_kq,
    double dropout_rate, Rng * dropout_rng) const;
};

class ContextEncoder
{
public:
  static ContextEncoder create(ParamStore & store, const ModelConfig & config, Rng & rng);

  /**
   * @brief Runs the top-k context layers over map and valid non-focal tokens, then the dense head.
   *
   * Invalid (masked) non-focal tokens are dropped from the context set.
   */
  ContextCache encode(
    const TokenBatch & map_tokens, const TokenBatch & nonfocal_tokens, Rng * dropout_rng = nullptr) const;

  /// Rough trajectories and fused features for non-focal features [N, H].
  std::pair<Tensor, Tensor> dense_future_head(const Tensor & f_nonfocal) const;

  const std::vector<ContextLayer> & layers() const { return layers_; }
  const SpatialPosEmbedding & pos() const { return pos_; }

private:
  ModelConfig config_;
  SpatialPosEmbedding pos_;
  std::vector<ContextLayer> layers_;
  Mlp dense_traj_;
  Mlp dense_fuse_;
};

}  // namespace amp

#endif  // AMP__CONTEXT_ENCODER_HPP_
