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

#include "amp/context_encoder.hpp"

#include "amp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace amp
{
namespace
{
constexpr double kDistanceQuantum = 1e6;
}  // namespace

std::vector<std::vector<std::size_t>> topk_neighbors(std::span<const Pose2D> frames, std::size_t k)
{
  if (k == 0) {
    throw ConfigError("top-k neighbors: k must be >= 1");
  }
  const std::size_t n = frames.size();
  std::vector<std::vector<std::size_t>> out(n);
  // Distances are compared on a 1 um grid so that ties survive rounding under rigid motion.
  std::vector<std::pair<std::int64_t, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        const double dx = frames[j].x - frames[i].x;
        const double dy = frames[j].y - frames[i].y;
        cand.emplace_back(std::llround(std::sqrt(dx * dx + dy * dy) * kDistanceQuantum), j);
      }
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    for (std::size_t m = 0; m < take; ++m) {
      out[i].push_back(cand[m].second);
    }
  }
  return out;
}

ContextLayer ContextLayer::create(ParamStore & store, const std::string & name, const ModelConfig & c, Rng & rng)
{
  ContextLayer l;
  l.attn = RelativeAttention::create(store, name + ".attn", c.hidden, c.pos_hidden, c.num_heads, rng);
  l.norm1 = LayerNorm::create(store, name + ".ln1", c.hidden);
  l.ffn = Mlp::create(store, name + ".ffn", {c.hidden, c.ffn_hidden, c.hidden}, rng);
  l.norm2 = LayerNorm::create(store, name + ".ln2", c.hidden);
  return l;
}

Tensor ContextLayer::forward(
  const Tensor & x, const PairList & pairs, const Tensor & pos_qk, const Tensor & pos_kq,
  double dropout_rate, Rng * dropout_rng) const
{
  Tensor a = attn.forward(x, x, pairs, pos_qk, pos_kq);
  Tensor f;
  if (dropout_rng) {
    a = dropout(a, dropout_rate, *dropout_rng);
  }
  const Tensor h = norm1.forward(add(x, a));
  f = ffn.forward(h);
  if (dropout_rng) {
    f = dropout(f, dropout_rate, *dropout_rng);
  }
  return norm2.forward(add(h, f));
}

ContextEncoder ContextEncoder::create(ParamStore & store, const ModelConfig & config, Rng & rng)
{
  ContextEncoder e;
  e.config_ = config;
  e.pos_ = SpatialPosEmbedding::create(
    store, "ctx.pos", geometric_frequencies(config.base_frequency, config.num_frequencies),
    config.pos_hidden, config.pos_hidden, config.pe_global_delta ? DeltaMode::kGlobal : DeltaMode::kLocal,
    rng);
  for (std::size_t l = 0; l < config.context_layers; ++l) {
    e.layers_.push_back(ContextLayer::create(store, "ctx.layer" + std::to_string(l), config, rng));
  }
  const std::size_t traj = static_cast<std::size_t>(config.t_future) * 2;
  e.dense_traj_ = Mlp::create(store, "ctx.dense_traj", {config.hidden, config.ffn_hidden, traj}, rng);
  e.dense_fuse_ =
    Mlp::create(store, "ctx.dense_fuse", {config.hidden + traj, config.ffn_hidden, config.hidden}, rng);
  return e;
}

std::pair<Tensor, Tensor> ContextEncoder::dense_future_head(const Tensor & f_nonfocal) const
{
  const Tensor traj = dense_traj_.forward(f_nonfocal);
  const Tensor parts[2] = {f_nonfocal, traj};
  return {traj, dense_fuse_.forward(concat_cols(parts))};
}

ContextCache ContextEncoder::encode(
  const TokenBatch & map_tokens, const TokenBatch & nonfocal_tokens, Rng * dropout_rng) const
{
  ContextCache cache;
  cache.map_info = map_tokens.info;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < nonfocal_tokens.size(); ++i) {
    if (nonfocal_tokens.info[i].valid) {
      kept.push_back(i);
      cache.nonfocal_info.push_back(nonfocal_tokens.info[i]);
    }
  }
  const std::size_t n_map = map_tokens.size();
  const std::size_t n_nf = kept.size();
  const std::size_t h = config_.hidden;
  std::vector<Tensor> parts;
  if (n_map > 0) {
    parts.push_back(map_tokens.features);
  }
  if (n_nf > 0) {
    parts.push_back(kept.size() == nonfocal_tokens.size() ? nonfocal_tokens.features
                                                          : gather_rows(nonfocal_tokens.features, kept));
  }
  if (parts.empty()) {
    cache.f_map = Tensor::zeros({0, h});
    cache.f_nonfocal = Tensor::zeros({0, h});
    cache.dense_traj = Tensor::zeros({0, static_cast<std::size_t>(config_.t_future) * 2});
    return cache;
  }
  Tensor x = parts.size() == 1 ? parts[0] : concat_rows(parts);

  std::vector<Pose2D> frames;
  for (const TokenInfo & t : cache.map_info) {
    frames.push_back(t.frame);
  }
  for (const TokenInfo & t : cache.nonfocal_info) {
    frames.push_back(t.frame);
  }
  cache.neighbors = topk_neighbors(frames, config_.k_neighbors);
  PairList pairs;
  std::vector<Pose2D> src;
  std::vector<Pose2D> dst;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j : cache.neighbors[i]) {
      pairs.add(i, j);
      src.push_back(frames[i]);
      dst.push_back(frames[j]);
    }
    pairs.close_query();
  }
  const Tensor pos_qk = pos_.embed_pairs(src, dst);
  const Tensor pos_kq = pos_.embed_pairs(dst, src);
  for (const ContextLayer & layer : layers_) {
    x = layer.forward(x, pairs, pos_qk, pos_kq, config_.dropout, dropout_rng);
  }

  std::vector<std::size_t> map_rows(n_map);
  std::iota(map_rows.begin(), map_rows.end(), 0);
  std::vector<std::size_t> nf_rows(n_nf);
  std::iota(nf_rows.begin(), nf_rows.end(), n_map);
  cache.f_map = n_map > 0 ? gather_rows(x, map_rows) : Tensor::zeros({0, h});
  if (n_nf > 0) {
    auto [traj, fused] = dense_future_head(gather_rows(x, nf_rows));
    cache.dense_traj = traj;
    cache.f_nonfocal = fused;
  } else {
    cache.f_nonfocal = Tensor::zeros({0, h});
    cache.dense_traj = Tensor::zeros({0, static_cast<std::size_t>(config_.t_future) * 2});
  }
  return cache;
}

}  // namespace amp
