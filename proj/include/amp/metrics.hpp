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


#ifndef AMP__METRICS_HPP_
#define AMP__METRICS_HPP_

#include "amp/inference.hpp"
#include "amp/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace amp
{

struct EvalConfig
{
  /// Every stride-th future step is evaluated (steps stride-1, 2*stride-1, ...).
  std::size_t eval_stride{1};
  double miss_threshold{2.0};
  /// Extra 0-based future step indices at which minFDE and miss rate are reported.
  std::vector<std::size_t> measure_horizons;
  /// Average mAP over agent types instead of pooling all agents.
  bool map_per_type{false};
};

struct GroundTruth
{
  std::vector<Point2D> points;
  std::vector<bool> valid;
};

/// Future of one agent: steps t_obs .. t_obs + t_future - 1.
GroundTruth future_ground_truth(const SceneSample & scene, const AgentTrack & track);

/// Min over modes of mean L2 at evaluated valid steps; nullopt without such steps.
std::optional<double> min_ade(
  const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, std::size_t stride = 1);
/// Min over modes of L2 at step `step` (default: last); nullopt if that step is missing.
std::optional<double> min_fde(
  const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, std::optional<std::size_t> step = {});
/// True iff no mode ends within `threshold`; nullopt if the step is missing.
std::optional<bool> is_miss(
  const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, double threshold,
  std::optional<std::size_t> step = {});

struct ScoredDetection
{
  std::size_t agent{0};
  double score{0.0};
  bool hit{false};
};

/**
 * @brief All-point interpolated average precision.
 *
 * Detections are ranked by score (ties keep input order). A detection is a true
 * positive iff it hits and is the first hit of its agent; later hits are duplicates.
 */
double average_precision(std::vector<ScoredDetection> detections, std::size_t num_positives);

struct AgentEval
{
  std::vector<ModeTrajectory> modes;
  GroundTruth gt;
  AgentType type{AgentType::kVehicle};
};

/// Pooled mAP over agents with a valid final step; nullopt when there are none.
std::optional<double> simplified_map(const std::vector<AgentEval> & agents, const EvalConfig & config);

struct SceneEval
{
  std::string scene_id;
  std::size_t agents{0};
  double min_ade{0.0};
  double min_fde{0.0};
  double miss_rate{0.0};
};

struct EvalReport
{
  std::size_t agents{0};
  std::optional<double> min_ade;
  std::optional<double> min_fde;
  std::optional<double> miss_rate;
  std::optional<double> map;
  std::vector<std::pair<std::size_t, double>> horizon_min_fde;
  std::vector<std::pair<std::size_t, double>> horizon_miss_rate;
  std::vector<SceneEval> scenes;
};

/**
 * @brief Scores predictions against the focal futures of `scenes`.
 *
 * Every prediction must name an existing scene and agent. Throws UsageError on an
 * empty prediction set.
 */
EvalReport evaluate(
  const std::vector<AgentPrediction> & predictions, const std::vector<SceneSample> & scenes,
  const EvalConfig & config);

std::string report_to_json(const EvalReport & report);

}  // namespace amp

#endif  // AMP__METRICS_HPP_
