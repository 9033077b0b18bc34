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

#include "amp/nn.hpp"

#include "amp/errors.hpp"

#include <cmath>

namespace amp
{

// --- ParamStore ------------------------------------------------------------------

Tensor ParamStore::add(const std::string & name, Tensor t)
{
  if (index_.count(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  t.set_requires_grad(true);
  index_[name] = items_.size();
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::add_matrix(const std::string & name, std::size_t fan_in, std::size_t fan_out, Rng & rng)
{
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double & v : w) {
    v = rng.uniform(-a, a);
  }
  return add(name, Tensor::from({fan_in, fan_out}, std::move(w)));
}

Tensor ParamStore::add_constant(const std::string & name, Shape shape, double value)
{
  return add(name, Tensor::full(std::move(shape), value));
}

Tensor ParamStore::add_normal(const std::string & name, Shape shape, double stddev, Rng & rng)
{
  std::vector<double> w(shape_numel(shape));
  for (double & v : w) {
    v = rng.normal(0.0, stddev);
  }
  return add(name, Tensor::from(std::move(shape), std::move(w)));
}

Tensor ParamStore::get(const std::string & name) const
{
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw UsageError("unknown parameter: " + name);
  }
  return items_[it->second].second;
}

std::size_t ParamStore::total_elements() const
{
  std::size_t n = 0;
  for (const auto & [name, t] : items_) {
    n += t.numel();
  }
  return n;
}

void ParamStore::zero_grad()
{
  for (auto & [name, t] : items_) {
    t.zero_grad();
  }
}

// --- Linear / MLP / LayerNorm ----------------------------------------------------

Linear Linear::create(
  ParamStore & store, const std::string & name, std::size_t in, std::size_t out, Rng & rng,
  bool with_bias)
{
  Linear l;
  l.weight = store.add_matrix(name + ".w", in, out, rng);
  if (with_bias) {
    l.bias = store.add_constant(name + ".b", {out}, 0.0);
  }
  return l;
}

Tensor Linear::forward(const Tensor & x) const
{
  if (x.rank() != 2 || x.cols() != weight.rows()) {
    throw ShapeError(
      "linear: input " + shape_to_string(x.shape()) + " vs weight " +
      shape_to_string(weight.shape()));
  }
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_bias(y, bias) : y;
}

Tensor mlp_forward(const Tensor & x, std::span<const Linear> layers, Activation activation)
{
  if (layers.empty()) {
    throw ConfigError("mlp: no layers");
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0 && layers[i].in_features() != layers[i - 1].out_features()) {
      throw ShapeError("mlp: chained widths do not match");
    }
    h = layers[i].forward(h);
    if (i + 1 < layers.size() && activation == Activation::kRelu) {
      h = relu(h);
    }
  }
  return h;
}

Mlp Mlp::create(
  ParamStore & store, const std::string & name, const std::vector<std::size_t> & widths, Rng & rng)
{
  if (widths.size() < 2) {
    throw ConfigError("mlp needs at least input and output widths");
  }
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(
      Linear::create(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

LayerNorm LayerNorm::create(ParamStore & store, const std::string & name, std::size_t width)
{
  LayerNorm ln;
  ln.gamma = store.add_constant(name + ".gamma", {width}, 1.0);
  ln.beta = store.add_constant(name + ".beta", {width}, 0.0);
  return ln;
}

// --- attention -------------------------------------------------------------------

Tensor scaled_dot_attention(
  const Tensor & q, const Tensor & k, const Tensor & v, std::size_t num_heads,
  const AttentionMask * mask)
{
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw ShapeError("attention: rank-2 inputs required");
  }
  if (k.rows() != v.rows() || q.cols() != k.cols() || k.cols() != v.cols()) {
    throw ShapeError("attention: q/k/v widths or key counts differ");
  }
  const std::size_t nq = q.rows();
  const std::size_t nk = k.rows();
  if (mask && (mask->queries != nq || mask->keys != nk || mask->allowed.size() != nq * nk)) {
    throw ShapeError("attention: mask shape must be (queries, keys)");
  }
  PairList pairs;
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nk; ++j) {
      if (!mask || mask->at(i, j)) {
        pairs.add(i, j);
      }
    }
    pairs.close_query();
  }
  return pair_attention(
    gather_rows(q, pairs.query), gather_rows(k, pairs.key), gather_rows(v, pairs.key),
    pairs.offsets, num_heads);
}

MultiHeadAttention MultiHeadAttention::create(
  ParamStore & store, const std::string & name, std::size_t width, std::size_t num_heads, Rng & rng)
{
  if (num_heads == 0 || width % num_heads != 0) {
    throw ConfigError("attention width not divisible by head count");
  }
  MultiHeadAttention m;
  m.q_proj = Linear::create(store, name + ".q", width, width, rng);
  m.k_proj = Linear::create(store, name + ".k", width, width, rng);
  m.v_proj = Linear::create(store, name + ".v", width, width, rng);
  m.out_proj = Linear::create(store, name + ".o", width, width, rng, false);
  m.num_heads = num_heads;
  return m;
}

Tensor MultiHeadAttention::forward(
  const Tensor & q, const Tensor & k, const Tensor & v, const AttentionMask * mask) const
{
  return out_proj.forward(scaled_dot_attention(
    q_proj.forward(q), k_proj.forward(k), v_proj.forward(v), num_heads, mask));
}

RelativeAttention RelativeAttention::create(
  ParamStore & store, const std::string & name, std::size_t width, std::size_t pos_width,
  std::size_t num_heads, Rng & rng)
{
  if (num_heads == 0 || width % num_heads != 0) {
    throw ConfigError("attention width not divisible by head count");
  }
  RelativeAttention a;
  a.q_feat = Linear::create(store, name + ".q_feat", width, width, rng);
  a.q_pos = Linear::create(store, name + ".q_pos", pos_width, width, rng, false);
  a.k_feat = Linear::create(store, name + ".k_feat", width, width, rng);
  a.k_pos = Linear::create(store, name + ".k_pos", pos_width, width, rng, false);
  a.v_feat = Linear::create(store, name + ".v_feat", width, width, rng);
  a.v_pos = Linear::create(store, name + ".v_pos", pos_width, width, rng, false);
  a.out_proj = Linear::create(store, name + ".o", width, width, rng, false);
  a.num_heads = num_heads;
  return a;
}

Tensor RelativeAttention::forward(
  const Tensor & query_feats, const Tensor & key_feats, const PairList & pairs,
  const Tensor & pos_qk, const Tensor & pos_kq, const Tensor * query_offset,
  const RopeSettings * rope) const
{
  const std::size_t nq = query_feats.rows();
  if (pairs.num_queries() != nq) {
    throw ShapeError("relative attention: pair groups do not match query count");
  }
  if (pairs.size() == 0) {
    return Tensor::zeros({nq, width()});
  }
  if (pos_qk.rows() != pairs.size() || pos_kq.rows() != pairs.size()) {
    throw ShapeError("relative attention: one position embedding per pair required");
  }
  Tensor qin = query_offset ? add(query_feats, *query_offset) : query_feats;
  Tensor q_f = gather_rows(q_feat.forward(qin), pairs.query);
  Tensor k_f = gather_rows(k_feat.forward(key_feats), pairs.key);
  Tensor q_p = q_pos.forward(pos_qk);
  Tensor k_p = k_pos.forward(pos_kq);
  Tensor q;
  Tensor k;
  if (rope) {
    std::vector<double> qpos(pairs.size());
    std::vector<double> kpos(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      qpos[p] = rope->query_positions[pairs.query[p]];
      kpos[p] = rope->key_positions[pairs.key[p]];
    }
    const std::size_t head_dim = width() / num_heads;
    if (rope->scope == RopeScope::kFeatureOnly) {
      q = add(amp::rope(q_f, qpos, head_dim, rope->base), q_p);
      k = add(amp::rope(k_f, kpos, head_dim, rope->base), k_p);
    } else {
      q = amp::rope(add(q_f, q_p), qpos, head_dim, rope->base);
      k = amp::rope(add(k_f, k_p), kpos, head_dim, rope->base);
    }
  } else {
    q = add(q_f, q_p);
    k = add(k_f, k_p);
  }
  Tensor v = add(gather_rows(v_feat.forward(key_feats), pairs.key), v_pos.forward(pos_kq));
  return out_proj.forward(pair_attention(q, k, v, pairs.offsets, num_heads));
}

// --- spatial position embedding --------------------------------------------------

Tensor fourier_features(std::span<const RelativeTransform> rel, std::span<const double> frequencies)
{
  const std::size_t w = fourier_width(frequencies.size());
  std::vector<double> out(rel.size() * w);
  for (std::size_t i = 0; i < rel.size(); ++i) {
    fourier_encode(rel[i], frequencies, std::span<double>(out.data() + i * w, w));
  }
  return Tensor::from({rel.size(), w}, std::move(out));
}

SpatialPosEmbedding SpatialPosEmbedding::create(
  ParamStore & store, const std::string & name, std::vector<double> frequencies, std::size_t hidden,
  std::size_t out, DeltaMode mode, Rng & rng)
{
  SpatialPosEmbedding pe;
  const std::size_t in = fourier_width(frequencies.size());
  pe.frequencies = std::move(frequencies);
  pe.mlp = Mlp::create(store, name, {in, hidden, out}, rng);
  pe.mode = mode;
  return pe;
}

Tensor SpatialPosEmbedding::embed(std::span<const RelativeTransform> rel) const
{
  if (rel.empty()) {
    return Tensor::zeros({0, out_features()});
  }
  return mlp.forward(fourier_features(rel, frequencies));
}

Tensor SpatialPosEmbedding::embed_pairs(std::span<const Pose2D> src, std::span<const Pose2D> dst) const
{
  if (src.size() != dst.size()) {
    throw ShapeError("embed_pairs: source/destination count mismatch");
  }
  std::vector<RelativeTransform> rel(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    rel[i] = relative_transform(src[i], dst[i], mode);
  }
  return embed(rel);
}

Tensor spatial_pos_embed(
  const RelativeTransform & rel, std::span<const double> frequencies, const Mlp & mlp)
{
  if (mlp.in_features() != fourier_width(frequencies.size())) {
    throw ShapeError("spatial_pos_embed: MLP input width differs from Fourier width");
  }
  const RelativeTransform one[1] = {rel};
  return mlp.forward(fourier_features(one, frequencies));
}

}  // namespace amp
