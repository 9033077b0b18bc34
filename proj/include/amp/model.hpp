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


#ifndef AMP__MODEL_HPP_
#define AMP__MODEL_HPP_

#include "amp/anchors.hpp"
#include "amp/config.hpp"
#include "amp/context_encoder.hpp"
#include "amp/detokenizer.hpp"
#include "amp/future_decoder.hpp"
#include "amp/nn.hpp"
#include "amp/scene.hpp"
#include "amp/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace amp
{

/**
 * @brief All trainable parts plus the fitted anchors.
 *
 * Parameters are registered in a fixed order, so two models built from the
 * same config and seed are identical and checkpoints map by name.
 */
struct AmpModel
{
  ModelConfig config;
  ParamStore params;
  Tokenizer tokenizer;
  ContextEncoder context;
  FutureDecoder decoder;
  Detokenizer detokenizer;
  AnchorSet anchors;

  static AmpModel create(const ModelConfig & config, std::uint64_t seed);
};

/**
 * @brief Map tokens and observed tokens of every non-focal agent, encoded.
 *
 * Agents listed in `decoded` (scene indices) are left out: they enter the pass as
 * decoder rows and must not see their own later intervals through the context.
 */
ContextCache build_context(
  const AmpModel & model, const SceneSample & scene, Rng * dropout_rng = nullptr,
  std::span<const std::size_t> decoded = {});

/**
 * @brief Teacher-forced decoder pass over every token of the chosen agents.
 *
 * Row a * L_total + t holds agent `agent_ids[a]` at token step t, all in the shared lane.
 * The chosen agents are excluded from the context cache.
 */
struct ScenePass
{
  ContextCache cache;
  std::vector<std::size_t> agents;  // scene agent index per decoder agent
  std::vector<DecoderRow> rows;
  Tensor tokens;   // decoder inputs [rows, H]
  Tensor decoded;  // decoder outputs [rows, H]
};

ScenePass teacher_forced_pass(
  const AmpModel & model, const SceneSample & scene, std::span<const std::int64_t> agent_ids,
  Rng * dropout_rng = nullptr);

/// Decoder rows for the given token batch and decoder agent slot.
std::vector<DecoderRow> rows_for(const TokenBatch & tokens, std::size_t agent_slot, int lane);

std::size_t find_agent(const SceneSample & scene, std::int64_t id);

}  // namespace amp

#endif  // AMP__MODEL_HPP_
