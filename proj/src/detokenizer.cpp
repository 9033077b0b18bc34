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

#include "amp/detokenizer.hpp"

#include "amp/errors.hpp"

namespace amp
{

Detokenizer Detokenizer::create(ParamStore & store, const ModelConfig & config, Rng & rng)
{
  Detokenizer d;
  d.config_ = config;
  const std::size_t h = config.hidden;
  d.f_long_ = store.add_normal("detok.f_long", {config.k_long, h}, 0.5, rng);
  d.f_short_ = store.add_normal("detok.f_short", {config.k_short, h}, 0.5, rng);
  d.cls_short_ = Mlp::create(store, "detok.cls_short", {2 * h, h, config.k_short}, rng);
  d.refine_ = Mlp::create(store, "detok.refine", {3 * h, h, h}, rng);
  d.dec_short_ = Mlp::create(store, "detok.dec_short", {h, h, static_cast<std::size_t>(config.t_token) * 2}, rng);
  d.dec_long_ = Mlp::create(store, "detok.dec_long", {h, h, static_cast<std::size_t>(config.t_future) * 2}, rng);
  d.conf_ = Mlp::create(store, "detok.conf", {h, h, 1}, rng);
  return d;
}

Tensor Detokenizer::expand_modes(const Tensor & tokens) const
{
  if (tokens.rank() != 2 || tokens.cols() != config_.hidden) {
    throw ShapeError("expand_modes: tokens must be [N, H]");
  }
  const std::size_t n = tokens.rows();
  const std::size_t k = config_.k_long;
  std::vector<std::size_t> tok_rows(n * k);
  std::vector<std::size_t> mode_rows(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < k; ++m) {
      tok_rows[i * k + m] = i;
      mode_rows[i * k + m] = m;
    }
  }
  const Tensor parts[2] = {gather_rows(tokens, tok_rows), gather_rows(f_long_, mode_rows)};
  return concat_cols(parts);
}

std::pair<Tensor, Tensor> Detokenizer::short_term_refine(const Tensor & mode_tokens) const
{
  Tensor logits;
  Tensor weighted;
  if (config_.local_intention_enabled) {
    logits = cls_short_.forward(mode_tokens);
    weighted = matmul(softmax(logits, 1), f_short_);
  } else {
    weighted = Tensor::zeros({mode_tokens.rows(), config_.hidden});
  }
  const Tensor parts[2] = {weighted, mode_tokens};
  return {refine_.forward(concat_cols(parts)), logits};
}

ModeOutputs Detokenizer::forward(const Tensor & tokens) const
{
  ModeOutputs out;
  auto [refined, logits] = short_term_refine(expand_modes(tokens));
  out.refined = refined;
  out.short_logits = logits;
  out.confidence = reshape(confidence(refined), {tokens.rows(), config_.k_long});
  return out;
}

}  // namespace amp
