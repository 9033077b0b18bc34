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

#include "amp/metrics.hpp"

#include "amp/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace amp
{

GroundTruth future_ground_truth(const SceneSample & scene, const AgentTrack & track)
{
  GroundTruth gt;
  for (int s = scene.t_obs; s < scene.total_steps(); ++s) {
    const AgentState & st = track.states[static_cast<std::size_t>(s)];
    gt.points.push_back({st.x, st.y});
    gt.valid.push_back(st.valid);
  }
  return gt;
}

namespace
{
double dist(const Point2D & a, const Point2D & b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

void check_lengths(const std::vector<ModeTrajectory> & modes, const GroundTruth & gt)
{
  if (modes.empty()) {
    throw UsageError("metrics need at least one mode");
  }
  for (const ModeTrajectory & m : modes) {
    if (m.waypoints.size() != gt.points.size()) {
      throw ShapeError("mode length differs from ground truth length");
    }
  }
}
}  // namespace

std::optional<double> min_ade(const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, std::size_t stride)
{
  check_lengths(modes, gt);
  stride = std::max<std::size_t>(1, stride);
  std::optional<double> best;
  for (const ModeTrajectory & m : modes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = stride - 1; i < gt.points.size(); i += stride) {
      if (gt.valid[i]) {
        sum += dist(m.waypoints[i], gt.points[i]);
        ++n;
      }
    }
    if (n == 0) {
      return std::nullopt;
    }
    const double ade = sum / static_cast<double>(n);
    if (!best || ade < *best) {
      best = ade;
    }
  }
  return best;
}

std::optional<double> min_fde(
  const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, std::optional<std::size_t> step)
{
  check_lengths(modes, gt);
  const std::size_t s = step.value_or(gt.points.size() - 1);
  if (s >= gt.points.size() || !gt.valid[s]) {
    return std::nullopt;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const ModeTrajectory & m : modes) {
    best = std::min(best, dist(m.waypoints[s], gt.points[s]));
  }
  return best;
}

std::optional<bool> is_miss(
  const std::vector<ModeTrajectory> & modes, const GroundTruth & gt, double threshold,
  std::optional<std::size_t> step)
{
  const std::optional<double> fde = min_fde(modes, gt, step);
  if (!fde) {
    return std::nullopt;
  }
  return !(*fde <= threshold);
}

double average_precision(std::vector<ScoredDetection> detections, std::size_t num_positives)
{
  if (num_positives == 0) {
    throw UsageError("average precision needs at least one positive");
  }
  std::stable_sort(detections.begin(), detections.end(), [](const ScoredDetection & a, const ScoredDetection & b) {
    return a.score > b.score;
  });
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<bool> matched;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const ScoredDetection & d = detections[i];
    if (d.agent >= matched.size()) {
      matched.resize(d.agent + 1, false);
    }
    if (d.hit && !matched[d.agent]) {
      matched[d.agent] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_positives));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::optional<double> simplified_map(const std::vector<AgentEval> & agents, const EvalConfig & config)
{
  auto pooled = [&](int type) -> std::optional<double> {
    std::vector<ScoredDetection> dets;
    std::size_t positives = 0;
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const AgentEval & ag = agents[a];
      if (type >= 0 && static_cast<int>(ag.type) != type) {
        continue;
      }
      if (ag.gt.points.empty() || !ag.gt.valid.back()) {
        continue;
      }
      ++positives;
      for (const ModeTrajectory & m : ag.modes) {
        const bool hit = dist(m.waypoints.back(), ag.gt.points.back()) <= config.miss_threshold;
        dets.push_back({a, m.score, hit});
      }
    }
    if (positives == 0) {
      return std::nullopt;
    }
    return average_precision(std::move(dets), positives);
  };
  if (!config.map_per_type) {
    return pooled(-1);
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < kNumAgentTypes; ++t) {
    if (const std::optional<double> ap = pooled(static_cast<int>(t))) {
      sum += *ap;
      ++n;
    }
  }
  return n == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(n));
}

namespace
{
struct Mean
{
  double sum{0.0};
  std::size_t n{0};
  void add(double x)
  {
    sum += x;
    ++n;
  }
  std::optional<double> value() const
  {
    return n == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(n));
  }
};
}  // namespace

EvalReport evaluate(
  const std::vector<AgentPrediction> & predictions, const std::vector<SceneSample> & scenes,
  const EvalConfig & config)
{
  if (predictions.empty()) {
    throw UsageError("no predictions to evaluate");
  }
  std::map<std::string, std::size_t> scene_index;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    scene_index[scenes[i].scene_id] = i;
  }
  EvalReport report;
  std::vector<AgentEval> agents;
  Mean ade;
  Mean fde;
  Mean miss;
  std::vector<Mean> h_fde(config.measure_horizons.size());
  std::vector<Mean> h_miss(config.measure_horizons.size());
  std::map<std::string, std::size_t> scene_slot;
  std::vector<std::array<Mean, 3>> per_scene;
  for (const AgentPrediction & p : predictions) {
    auto it = scene_index.find(p.scene_id);
    if (it == scene_index.end()) {
      throw ValidationError("scene_id", "prediction references unknown scene '" + p.scene_id + "'");
    }
    const SceneSample & scene = scenes[it->second];
    const AgentTrack & track = scene.agents[find_agent(scene, p.agent_id)];
    AgentEval ag{p.modes, future_ground_truth(scene, track), track.type};
    auto [slot, inserted] = scene_slot.try_emplace(p.scene_id, per_scene.size());
    if (inserted) {
      per_scene.emplace_back();
      report.scenes.push_back({p.scene_id, 0, 0.0, 0.0, 0.0});
    }
    ++report.scenes[slot->second].agents;
    ++report.agents;
    if (const auto v = min_ade(ag.modes, ag.gt, config.eval_stride)) {
      ade.add(*v);
      per_scene[slot->second][0].add(*v);
    }
    if (const auto v = min_fde(ag.modes, ag.gt)) {
      fde.add(*v);
      per_scene[slot->second][1].add(*v);
    }
    if (const auto v = is_miss(ag.modes, ag.gt, config.miss_threshold)) {
      miss.add(*v ? 1.0 : 0.0);
      per_scene[slot->second][2].add(*v ? 1.0 : 0.0);
    }
    for (std::size_t h = 0; h < config.measure_horizons.size(); ++h) {
      const std::size_t step = config.measure_horizons[h];
      if (step >= ag.gt.points.size()) {
        throw ConfigError("measure horizon " + std::to_string(step) + " beyond the future length");
      }
      if (const auto v = min_fde(ag.modes, ag.gt, step)) {
        h_fde[h].add(*v);
      }
      if (const auto v = is_miss(ag.modes, ag.gt, config.miss_threshold, step)) {
        h_miss[h].add(*v ? 1.0 : 0.0);
      }
    }
    agents.push_back(std::move(ag));
  }
  report.min_ade = ade.value();
  report.min_fde = fde.value();
  report.miss_rate = miss.value();
  report.map = simplified_map(agents, config);
  for (std::size_t h = 0; h < config.measure_horizons.size(); ++h) {
    if (const auto v = h_fde[h].value()) {
      report.horizon_min_fde.emplace_back(config.measure_horizons[h], *v);
    }
    if (const auto v = h_miss[h].value()) {
      report.horizon_miss_rate.emplace_back(config.measure_horizons[h], *v);
    }
  }
  for (std::size_t s = 0; s < per_scene.size(); ++s) {
    report.scenes[s].min_ade = per_scene[s][0].value().value_or(0.0);
    report.scenes[s].min_fde = per_scene[s][1].value().value_or(0.0);
    report.scenes[s].miss_rate = per_scene[s][2].value().value_or(0.0);
  }
  return report;
}

std::string report_to_json(const EvalReport & report)
{
  using nlohmann::json;
  auto opt = [](const std::optional<double> & v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["format_version"] = 1;
  j["agents"] = report.agents;
  j["min_ade"] = opt(report.min_ade);
  j["min_fde"] = opt(report.min_fde);
  j["miss_rate"] = opt(report.miss_rate);
  j["map"] = opt(report.map);
  json horizons = json::array();
  for (std::size_t i = 0; i < report.horizon_min_fde.size(); ++i) {
    json h{{"step", report.horizon_min_fde[i].first}, {"min_fde", report.horizon_min_fde[i].second}};
    if (i < report.horizon_miss_rate.size()) {
      h["miss_rate"] = report.horizon_miss_rate[i].second;
    }
    horizons.push_back(h);
  }
  j["horizons"] = horizons;
  json scenes = json::array();
  for (const SceneEval & s : report.scenes) {
    scenes.push_back(
      {{"scene_id", s.scene_id}, {"agents", s.agents}, {"min_ade", s.min_ade}, {"min_fde", s.min_fde},
       {"miss_rate", s.miss_rate}});
  }
  j["scenes"] = scenes;
  return j.dump(2);
}

}  // namespace amp
