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


#ifndef AMP__DETOKENIZER_HPP_
#define AMP__DETOKENIZER_HPP_

#include "amp/config.hpp"
#include "amp/nn.hpp"

namespace amp
{

/**
 * @brief Mode-expanded features of N decoded tokens; mode rows are ordered n * K_long + k.
 */
struct ModeOutputs
{
  Tensor refined;       // [N * K_long, H]
  Tensor short_logits;  // [N * K_long, K_short]; undefined without the local intention feature
  Tensor confidence;    // [N, K_long]
};

class Detokenizer
{
public:
  static Detokenizer create(ParamStore & store, const ModelConfig & config, Rng & rng);

  /// [Tok; F_long^k] for every token and mode: [N * K_long, 2H].
  Tensor expand_modes(const Tensor & tokens) const;
  /// Refined features [M, H] and short logits [M, K_short] of mode tokens [M, 2H].
  std::pair<Tensor, Tensor> short_term_refine(const Tensor & mode_tokens) const;
  ModeOutputs forward(const Tensor & tokens) const;

  /// [M, T_token * 2] local waypoints.
  Tensor decode_short(const Tensor & refined) const { return dec_short_.forward(refined); }
  /// [M, T_future * 2] local waypoints.
  Tensor decode_long(const Tensor & refined) const { return dec_long_.forward(refined); }
  /// [M, 1] confidence logits.
  Tensor confidence(const Tensor & refined) const { return conf_.forward(refined); }

  const Tensor & f_long() const { return f_long_; }
  const Tensor & f_short() const { return f_short_; }
  const Mlp & cls_short() const { return cls_short_; }

private:
  ModelConfig config_;
  Tensor f_long_;   // [K_long, H]
  Tensor f_short_;  // [K_short, H]
  Mlp cls_short_;
  Mlp refine_;
  Mlp dec_short_;
  Mlp dec_long_;
  Mlp conf_;
};

}  // namespace amp

#endif  // AMP__DETOKENIZER_HPP_
