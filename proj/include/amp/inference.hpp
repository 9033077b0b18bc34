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


#ifndef AMP__INFERENCE_HPP_
#define AMP__INFERENCE_HPP_

#include "amp/config.hpp"
#include "amp/model.hpp"

#include <string>
#include <vector>

namespace amp
{

struct ModeTrajectory
{
  /// T_future global waypoints.
  std::vector<Point2D> waypoints;
  double score{0.0};
  /// Lane (long-anchor) index the trajectory came from.
  std::size_t mode{0};
};

struct AgentPrediction
{
  std::string scene_id;
  std::int64_t agent_id{0};
  std::vector<ModeTrajectory> modes;
};

/**
 * @brief Weights of (short, long_0, ..., long_{n-1}) at rollout step t, normalized to sum 1.
 *
 * Raw weights are t^tau for the short prediction and t'^tau for the long prediction
 * stored at step t'. Returns {1, 0, ...} when all raw weights are zero.
 */
std::vector<double> fuse_weights(int t, std::size_t num_longs, double tau);

/**
 * @brief Weighted average of the short prediction and the matching slices of stored long predictions.
 *
 * stored_longs[t'] holds the T_future-point prediction made at step t'; its slice
 * for step t starts at point (t - t') * T_token.
 */
std::vector<Point2D> fuse(
  std::span<const Point2D> short_pred, const std::vector<std::vector<Point2D>> & stored_longs, int t,
  double tau);

/**
 * @brief Greedy endpoint NMS. Returns selected candidate indices in selection order.
 *
 * Highest score first (ties to the smaller index); a candidate is suppressed when
 * its endpoint lies within `dist_threshold` of an already selected endpoint.
 * If fewer than `out_count` survive, suppressed candidates are added by score.
 */
std::vector<std::size_t> nms_select(
  const std::vector<ModeTrajectory> & candidates, double dist_threshold, std::size_t out_count);

struct RolloutStats
{
  std::size_t decoder_rows{0};
  std::size_t decode_calls{0};
};

/**
 * @brief Multi-mode autoregressive rollout of every focal agent.
 *
 * The first step expands the last observed token into K_long lanes; lane k keeps
 * mode k. Each step fuses short and stored long predictions into the next
 * T_token waypoints, which are re-tokenized as the lane's next input. With
 * use_cache the decoder reuses the layer inputs of earlier rows; without it
 * every step recomputes each lane from the observed tokens.
 */
std::vector<AgentPrediction> rollout(
  const AmpModel & model, const SceneSample & scene, const InferenceConfig & config,
  RolloutStats * stats = nullptr);

inline constexpr int kPredictionFormatVersion = 1;

std::string prediction_to_json_line(const AgentPrediction & p);
AgentPrediction prediction_from_json_line(const std::string & text, std::size_t line = 1);
void save_predictions(const std::vector<AgentPrediction> & preds, const std::string & path);
std::vector<AgentPrediction> load_predictions(const std::string & path);

}  // namespace amp

#endif  // AMP__INFERENCE_HPP_
