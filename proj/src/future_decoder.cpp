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

#include "amp/future_decoder.hpp"

#include "amp/errors.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace amp
{

PairList temporal_pairs(std::span<const DecoderRow> keys, std::size_t query_base)
{
  std::map<std::pair<std::size_t, int>, int> last_temporal;
  for (const DecoderRow & r : keys) {
    auto [it, inserted] = last_temporal.try_emplace({r.agent, r.lane}, r.temporal);
    if (!inserted) {
      if (r.temporal <= it->second) {
        throw UsageError("decoder rows of one agent lane must have increasing temporal indices");
      }
      it->second = r.temporal;
    }
  }
  PairList pairs;
  std::vector<std::pair<int, std::size_t>> sel;
  for (std::size_t q = query_base; q < keys.size(); ++q) {
    const DecoderRow & qr = keys[q];
    sel.clear();
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const DecoderRow & kr = keys[k];
      if (kr.agent == qr.agent && kr.valid && kr.temporal <= qr.temporal &&
          (kr.lane == kSharedLane || kr.lane == qr.lane)) {
        sel.emplace_back(kr.temporal, k);
      }
    }
    std::sort(sel.begin(), sel.end());
    for (const auto & [t, k] : sel) {
      pairs.add(q - query_base, k);
    }
    pairs.close_query();
  }
  return pairs;
}

PairList spatial_pairs(std::span<const DecoderRow> keys, std::size_t query_base, int l_obs)
{
  PairList pairs;
  std::vector<std::pair<std::size_t, std::size_t>> sel;
  for (std::size_t q = query_base; q < keys.size(); ++q) {
    const DecoderRow & qr = keys[q];
    sel.clear();
    if (qr.temporal < l_obs) {
      for (std::size_t k = 0; k < keys.size(); ++k) {
        const DecoderRow & kr = keys[k];
        if (kr.valid && kr.temporal == qr.temporal && kr.lane == kSharedLane) {
          sel.emplace_back(kr.agent, k);
        }
      }
    }
    std::sort(sel.begin(), sel.end());
    for (const auto & [a, k] : sel) {
      pairs.add(q - query_base, k);
    }
    pairs.close_query();
  }
  return pairs;
}

DecoderLayer DecoderLayer::create(ParamStore & store, const std::string & name, const ModelConfig & c, Rng & rng)
{
  DecoderLayer l;
  l.cross_nonfocal = RelativeAttention::create(store, name + ".cross_nf", c.hidden, c.pos_hidden, c.num_heads, rng);
  l.cross_map = RelativeAttention::create(store, name + ".cross_map", c.hidden, c.pos_hidden, c.num_heads, rng);
  l.temporal = RelativeAttention::create(store, name + ".temporal", c.hidden, c.pos_hidden, c.num_heads, rng);
  l.spatial = RelativeAttention::create(store, name + ".spatial", c.hidden, c.pos_hidden, c.num_heads, rng);
  l.tpe = store.add_normal(name + ".tpe", {static_cast<std::size_t>(c.l_total()), c.hidden}, 0.02, rng);
  l.update = Mlp::create(store, name + ".update", {5 * c.hidden, 2 * c.hidden, c.hidden}, rng);
  return l;
}

FutureDecoder FutureDecoder::create(ParamStore & store, const ModelConfig & config, Rng & rng)
{
  FutureDecoder d;
  d.config_ = config;
  d.pos_ = SpatialPosEmbedding::create(
    store, "dec.pos", geometric_frequencies(config.base_frequency, config.num_frequencies),
    config.pos_hidden, config.pos_hidden, config.pe_global_delta ? DeltaMode::kGlobal : DeltaMode::kLocal,
    rng);
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    d.layers_.push_back(DecoderLayer::create(store, "dec.layer" + std::to_string(l), config, rng));
  }
  return d;
}

namespace
{
struct AttnInputs
{
  PairList pairs;
  Tensor pos_qk;
  Tensor pos_kq;
};

AttnInputs make_inputs(
  const SpatialPosEmbedding & pos, PairList pairs, std::span<const Pose2D> query_frames,
  std::span<const Pose2D> key_frames)
{
  std::vector<Pose2D> src(pairs.size());
  std::vector<Pose2D> dst(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    src[p] = query_frames[pairs.query[p]];
    dst[p] = key_frames[pairs.key[p]];
  }
  AttnInputs in;
  in.pos_qk = pos.embed_pairs(src, dst);
  in.pos_kq = pos.embed_pairs(dst, src);
  in.pairs = std::move(pairs);
  return in;
}

PairList all_pairs(std::size_t queries, std::size_t keys)
{
  PairList pairs;
  for (std::size_t q = 0; q < queries; ++q) {
    for (std::size_t k = 0; k < keys; ++k) {
      pairs.add(q, k);
    }
    pairs.close_query();
  }
  return pairs;
}

std::vector<Pose2D> frames_of(std::span<const DecoderRow> rows)
{
  std::vector<Pose2D> f;
  for (const DecoderRow & r : rows) {
    f.push_back(r.frame);
  }
  return f;
}

std::vector<Pose2D> frames_of(std::span<const TokenInfo> info)
{
  std::vector<Pose2D> f;
  for (const TokenInfo & t : info) {
    f.push_back(t.frame);
  }
  return f;
}

}  // namespace

namespace
{
Tensor tpe_offset(const DecoderLayer & layer, std::span<const DecoderRow> rows, int l_total)
{
  std::vector<std::size_t> idx;
  for (const DecoderRow & r : rows) {
    if (r.temporal < 0 || r.temporal >= l_total) {
      throw ShapeError("decoder row temporal index outside the embedding table");
    }
    idx.push_back(static_cast<std::size_t>(r.temporal));
  }
  return gather_rows(layer.tpe, idx);
}
}  // namespace

std::pair<Tensor, Tensor> FutureDecoder::context_cross_attention(
  const DecoderLayer & layer, const Tensor & x, std::span<const DecoderRow> rows,
  const ContextCache & cache) const
{
  const std::vector<Pose2D> qf = frames_of(rows);
  const AttnInputs nf =
    make_inputs(pos_, all_pairs(rows.size(), cache.nonfocal_info.size()), qf, frames_of(cache.nonfocal_info));
  const AttnInputs mp =
    make_inputs(pos_, all_pairs(rows.size(), cache.map_info.size()), qf, frames_of(cache.map_info));
  Tensor offset;
  const Tensor * off = nullptr;
  if (config_.tpe_enabled) {
    offset = tpe_offset(layer, rows, config_.l_total());
    off = &offset;
  }
  return {
    layer.cross_nonfocal.forward(x, cache.f_nonfocal, nf.pairs, nf.pos_qk, nf.pos_kq, off),
    layer.cross_map.forward(x, cache.f_map, mp.pairs, mp.pos_qk, mp.pos_kq, off)};
}

Tensor FutureDecoder::temporal_self_attention(
  const DecoderLayer & layer, const Tensor & keys_x, std::span<const DecoderRow> keys,
  std::size_t query_base) const
{
  const std::vector<Pose2D> kf = frames_of(keys);
  const AttnInputs in = make_inputs(
    pos_, temporal_pairs(keys, query_base), std::span<const Pose2D>(kf).subspan(query_base), kf);
  std::vector<std::size_t> qrows;
  std::vector<double> positions;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    positions.push_back(static_cast<double>(keys[k].temporal));
    if (k >= query_base) {
      qrows.push_back(k);
    }
  }
  const Tensor q = query_base == 0 ? keys_x : gather_rows(keys_x, qrows);
  if (!config_.rope_enabled) {
    return layer.temporal.forward(q, keys_x, in.pairs, in.pos_qk, in.pos_kq);
  }
  RopeSettings rope;
  rope.query_positions = std::span<const double>(positions).subspan(query_base);
  rope.key_positions = positions;
  rope.base = config_.rope_base;
  rope.scope = config_.rope_feature_only ? RopeScope::kFeatureOnly : RopeScope::kFull;
  return layer.temporal.forward(q, keys_x, in.pairs, in.pos_qk, in.pos_kq, nullptr, &rope);
}

Tensor FutureDecoder::spatial_self_attention(
  const DecoderLayer & layer, const Tensor & keys_x, std::span<const DecoderRow> keys,
  std::size_t query_base) const
{
  const std::size_t nq = keys.size() - query_base;
  if (!config_.spatial_attn_enabled) {
    return Tensor::zeros({nq, config_.hidden});
  }
  const std::vector<Pose2D> kf = frames_of(keys);
  const AttnInputs in = make_inputs(
    pos_, spatial_pairs(keys, query_base, config_.l_obs()),
    std::span<const Pose2D>(kf).subspan(query_base), kf);
  std::vector<std::size_t> qrows;
  for (std::size_t k = query_base; k < keys.size(); ++k) {
    qrows.push_back(k);
  }
  const Tensor q = query_base == 0 ? keys_x : gather_rows(keys_x, qrows);
  return layer.spatial.forward(q, keys_x, in.pairs, in.pos_qk, in.pos_kq);
}

Tensor FutureDecoder::layer_update(
  const DecoderLayer & layer, const Tensor & tok, const Tensor & f_nonfocal, const Tensor & f_map,
  const Tensor & f_temp, const Tensor & f_spatial) const
{
  const Tensor parts[5] = {tok, f_nonfocal, f_map, f_temp, f_spatial};
  return layer.update.forward(concat_cols(parts));
}

Tensor FutureDecoder::decode(
  const Tensor & x, std::span<const DecoderRow> rows, const ContextCache & cache,
  DecoderHistory * history, Rng * dropout_rng) const
{
  if (x.rank() != 2 || x.rows() != rows.size() || x.cols() != config_.hidden) {
    throw ShapeError("decoder input must be [rows, H]");
  }
  if (rows.empty()) {
    return x;
  }
  const std::size_t base = history ? history->size() : 0;
  std::vector<DecoderRow> keys;
  if (history) {
    keys = history->rows;
  }
  keys.insert(keys.end(), rows.begin(), rows.end());

  // Pair lists and position embeddings are shared by all layers.
  const std::vector<Pose2D> qf = frames_of(rows);
  const std::vector<Pose2D> kf = frames_of(keys);
  const AttnInputs nf =
    make_inputs(pos_, all_pairs(rows.size(), cache.nonfocal_info.size()), qf, frames_of(cache.nonfocal_info));
  const AttnInputs mp =
    make_inputs(pos_, all_pairs(rows.size(), cache.map_info.size()), qf, frames_of(cache.map_info));
  const AttnInputs tp = make_inputs(pos_, temporal_pairs(keys, base), qf, kf);
  AttnInputs sp;
  if (config_.spatial_attn_enabled) {
    sp = make_inputs(pos_, spatial_pairs(keys, base, config_.l_obs()), qf, kf);
  }
  std::vector<double> positions;
  for (const DecoderRow & r : keys) {
    positions.push_back(static_cast<double>(r.temporal));
  }
  RopeSettings rope;
  rope.query_positions = std::span<const double>(positions).subspan(base);
  rope.key_positions = positions;
  rope.base = config_.rope_base;
  rope.scope = config_.rope_feature_only ? RopeScope::kFeatureOnly : RopeScope::kFull;
  const RopeSettings * rope_ptr = config_.rope_enabled ? &rope : nullptr;

  if (history && history->layer_inputs.empty()) {
    history->layer_inputs.resize(layers_.size());
  }
  Tensor h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DecoderLayer & layer = layers_[l];
    Tensor keys_x = h;
    if (history && history->size() > 0) {
      const Tensor parts[2] = {history->layer_inputs[l], h};
      keys_x = concat_rows(parts);
    }
    Tensor offset;
    const Tensor * off = nullptr;
    if (config_.tpe_enabled) {
      offset = tpe_offset(layer, rows, config_.l_total());
      off = &offset;
    }
    const Tensor f_nf = layer.cross_nonfocal.forward(h, cache.f_nonfocal, nf.pairs, nf.pos_qk, nf.pos_kq, off);
    const Tensor f_map = layer.cross_map.forward(h, cache.f_map, mp.pairs, mp.pos_qk, mp.pos_kq, off);
    const Tensor f_temp = layer.temporal.forward(h, keys_x, tp.pairs, tp.pos_qk, tp.pos_kq, nullptr, rope_ptr);
    const Tensor f_sp = config_.spatial_attn_enabled
                          ? layer.spatial.forward(h, keys_x, sp.pairs, sp.pos_qk, sp.pos_kq)
                          : Tensor::zeros({rows.size(), config_.hidden});
    if (history) {
      history->layer_inputs[l] = keys_x.detach();
    }
    h = layer_update(layer, h, f_nf, f_map, f_temp, f_sp);
    if (dropout_rng) {
      h = dropout(h, config_.dropout, *dropout_rng);
    }
  }
  if (history) {
    history->rows = std::move(keys);
  }
  return h;
}

}  // namespace amp
