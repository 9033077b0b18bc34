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


#ifndef AMP__TRAINING_HPP_
#define AMP__TRAINING_HPP_

#include "amp/config.hpp"
#include "amp/model.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace amp
{

struct LossBreakdown
{
  double reg_short{0.0};
  double cls_short{0.0};
  double reg_long{0.0};
  double cls_long{0.0};
  double reg_dense{0.0};
  double total{0.0};
};

/// Differentiable loss terms of one scene; `total` is the weighted sum.
struct SceneLoss
{
  Tensor reg_short;
  Tensor cls_short;
  Tensor reg_long;
  Tensor cls_long;
  Tensor reg_dense;
  Tensor total;
  /// Per supervised token: decoder row and winning long / short anchor.
  std::vector<std::size_t> token_rows;
  std::vector<std::size_t> long_winners;
  std::vector<int> short_winners;
  /// Mode rows of the detokenizer output that fed the regression heads.
  Tensor refined;

  LossBreakdown values() const;
};

/// Supervision of one token: next-interval and long-horizon targets in its frame.
struct TokenTargets
{
  std::vector<double> short_xy;      // T_token * 2
  std::vector<double> short_mask;    // per coordinate
  std::vector<double> long_xy;       // T_future * 2
  std::vector<double> long_mask;
  std::size_t long_winner{0};
  int short_winner{-1};
};

/**
 * @brief Targets for the token ending at step `end_step`, or nullopt when the next
 * interval's final state is missing.
 *
 * The long winner uses the state at +T_future; when the horizon is cut off by the
 * data, the last valid future state at offset h is matched against anchors scaled by h / T_future.
 */
std::optional<TokenTargets> token_targets(
  const AgentTrack & track, const Pose2D & frame, int end_step, const ModelConfig & config,
  const AnchorSet & anchors);

/**
 * @brief Winner-take-all loss of one teacher-forced pass.
 *
 * Every term is a mean: regression terms average per token over valid points
 * (x and y errors summed) and then over tokens; classification terms average
 * cross-entropy over supervised tokens.
 */
SceneLoss compute_loss(
  const AmpModel & model, const SceneSample & scene, const ScenePass & pass, const TrainConfig & train);

/// Decoupled-weight-decay Adam over every tensor of a ParamStore.
class AdamW
{
public:
  AdamW(const ParamStore & params, const TrainConfig & config);
  void step(ParamStore & params, double lr);
  std::size_t steps() const { return t_; }

private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_{0};
};

/// Scales all gradients so their global L2 norm is at most `max_norm`; returns the pre-clip norm.
double clip_grad_norm(ParamStore & params, double max_norm);

/// Learning rate for a 1-based epoch: halved once per decay epoch already reached.
double learning_rate(const TrainConfig & config, int epoch);

struct StepRecord
{
  std::size_t step{0};
  int epoch{0};
  double lr{0.0};
  double grad_norm{0.0};
  LossBreakdown loss;
};

struct TrainResult
{
  std::vector<StepRecord> steps;
  std::vector<LossBreakdown> epochs;
};

/**
 * @brief Teacher-forced training over all tokens of each scene in parallel.
 *
 * Anchors must be fitted on the model beforehand. Scenes are shuffled per epoch
 * with the config seed; a batch loss is the mean scene loss. Writes one JSON
 * line per epoch to `log` when given. Throws NumericError naming the first
 * non-finite tensor.
 */
TrainResult train(
  AmpModel & model, const std::vector<SceneSample> & scenes, const TrainConfig & config,
  std::ostream * log = nullptr);

}  // namespace amp

#endif  // AMP__TRAINING_HPP_
