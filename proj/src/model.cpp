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

#include "amp/model.hpp"

#include "amp/errors.hpp"

#include <algorithm>

namespace amp
{

AmpModel AmpModel::create(const ModelConfig & config, std::uint64_t seed)
{
  config.validate();
  AmpModel m;
  m.config = config;
  Rng rng(seed);
  m.tokenizer = Tokenizer::create(m.params, config, rng);
  m.context = ContextEncoder::create(m.params, config, rng);
  m.decoder = FutureDecoder::create(m.params, config, rng);
  m.detokenizer = Detokenizer::create(m.params, config, rng);
  return m;
}

std::size_t find_agent(const SceneSample & scene, std::int64_t id)
{
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (scene.agents[i].id == id) {
      return i;
    }
  }
  throw ValidationError("agents", "no agent with id " + std::to_string(id));
}

ContextCache build_context(
  const AmpModel & model, const SceneSample & scene, Rng * dropout_rng, std::span<const std::size_t> decoded)
{
  std::vector<IntervalRef> refs;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const AgentTrack & track = scene.agents[i];
    if (!track.is_focal && std::find(decoded.begin(), decoded.end(), i) == decoded.end()) {
      const std::vector<IntervalRef> r = model.tokenizer.agent_intervals(track, false);
      refs.insert(refs.end(), r.begin(), r.end());
    }
  }
  return model.context.encode(
    model.tokenizer.encode_map(scene.map), model.tokenizer.encode_intervals(refs), dropout_rng);
}

std::vector<DecoderRow> rows_for(const TokenBatch & tokens, std::size_t agent_slot, int lane)
{
  std::vector<DecoderRow> rows;
  for (const TokenInfo & info : tokens.info) {
    rows.push_back({agent_slot, lane, info.temporal_index, info.frame, info.valid});
  }
  return rows;
}

ScenePass teacher_forced_pass(
  const AmpModel & model, const SceneSample & scene, std::span<const std::int64_t> agent_ids,
  Rng * dropout_rng)
{
  const ModelConfig & c = model.config;
  if (scene.t_obs != c.t_obs || scene.t_future != c.t_future) {
    throw ValidationError("t_obs", "scene step counts differ from the model configuration");
  }
  ScenePass pass;
  for (std::int64_t id : agent_ids) {
    pass.agents.push_back(find_agent(scene, id));
  }
  pass.cache = build_context(model, scene, dropout_rng, pass.agents);
  std::vector<IntervalRef> refs;
  for (std::size_t idx : pass.agents) {
    const std::vector<IntervalRef> r = model.tokenizer.agent_intervals(scene.agents[idx], true);
    refs.insert(refs.end(), r.begin(), r.end());
  }
  const TokenBatch tokens = model.tokenizer.encode_intervals(refs);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenInfo & info = tokens.info[i];
    pass.rows.push_back(
      {i / static_cast<std::size_t>(c.l_total()), kSharedLane, info.temporal_index, info.frame, info.valid});
  }
  pass.tokens = tokens.features;
  pass.decoded = model.decoder.decode(tokens.features, pass.rows, pass.cache, nullptr, dropout_rng);
  return pass;
}

}  // namespace amp
