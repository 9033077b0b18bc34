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


#ifndef AMP__FUTURE_DECODER_HPP_
#define AMP__FUTURE_DECODER_HPP_

#include "amp/config.hpp"
#include "amp/context_encoder.hpp"
#include "amp/nn.hpp"

#include <vector>

namespace amp
{

/// Lane value of rows shared by every mode (observed tokens and teacher-forced training rows).
inline constexpr int kSharedLane = -1;

/**
 * @brief Placement of one decoder token row.
 */
struct DecoderRow
{
  /// Index of the decoded agent within the scene's decoder agent list.
  std::size_t agent{0};
  int lane{kSharedLane};
  int temporal{0};
  Pose2D frame;
  bool valid{true};
};

/**
 * @brief Layer inputs of rows decoded so far; the keys reused by later rows.
 */
struct DecoderHistory
{
  std::vector<DecoderRow> rows;
  /// Per layer, the [rows, H] input features of those rows.
  std::vector<Tensor> layer_inputs;

  std::size_t size() const { return rows.size(); }
};

/**
 * @brief Causal temporal pairs: same agent, valid key, key temporal <= query temporal,
 * key lane shared or equal to the query lane; ordered by temporal index.
 *
 * Query q is keys[query_base + q]. Throws UsageError when rows of one (agent, lane)
 * are not in strictly increasing temporal order.
 */
PairList temporal_pairs(std::span<const DecoderRow> keys, std::size_t query_base);

/// Pairs among valid observed rows (temporal < l_obs) sharing the query's temporal index.
PairList spatial_pairs(std::span<const DecoderRow> keys, std::size_t query_base, int l_obs);

struct DecoderLayer
{
  RelativeAttention cross_nonfocal;
  RelativeAttention cross_map;
  RelativeAttention temporal;
  RelativeAttention spatial;
  Tensor tpe;  // [L_total, H]
  Mlp update;  // [Tok; F_nonfocal; F_map; F_temp; F_spatial] -> H

  static DecoderLayer create(ParamStore & store, const std::string & name, const ModelConfig & c, Rng & rng);
};

class FutureDecoder
{
public:
  static FutureDecoder create(ParamStore & store, const ModelConfig & config, Rng & rng);

  /**
   * @brief Runs every decoder layer on the query rows.
   *
   * Keys for temporal and spatial attention are the history rows followed by the
   * query rows. With a history, the query rows' layer inputs are appended to it.
   * Within a layer all attentions read the same input features.
   */
  Tensor decode(
    const Tensor & x, std::span<const DecoderRow> rows, const ContextCache & cache,
    DecoderHistory * history = nullptr, Rng * dropout_rng = nullptr) const;

  /// Context cross-attention of one layer: (F_nonfocal, F_map).
  std::pair<Tensor, Tensor> context_cross_attention(
    const DecoderLayer & layer, const Tensor & x, std::span<const DecoderRow> rows,
    const ContextCache & cache) const;
  Tensor temporal_self_attention(
    const DecoderLayer & layer, const Tensor & keys_x, std::span<const DecoderRow> keys,
    std::size_t query_base) const;
  Tensor spatial_self_attention(
    const DecoderLayer & layer, const Tensor & keys_x, std::span<const DecoderRow> keys,
    std::size_t query_base) const;
  Tensor layer_update(
    const DecoderLayer & layer, const Tensor & tok, const Tensor & f_nonfocal, const Tensor & f_map,
    const Tensor & f_temp, const Tensor & f_spatial) const;

  const std::vector<DecoderLayer> & layers() const { return layers_; }
  const SpatialPosEmbedding & pos() const { return pos_; }
  const ModelConfig & config() const { return config_; }

private:
  ModelConfig config_;
  SpatialPosEmbedding pos_;
  std::vector<DecoderLayer> layers_;
};

}  // namespace amp

#endif  // AMP__FUTURE_DECODER_HPP_
