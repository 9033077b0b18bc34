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

#include "amp/anchors.hpp"

#include "amp/errors.hpp"
#include "amp/random.hpp"
#include "amp/tokenizer.hpp"

#include <limits>

namespace amp
{

namespace
{
double sq_dist(const Point2D & a, const Point2D & b)
{
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}
}  // namespace

std::size_t select_winner(const Point2D & gt, std::span<const Point2D> anchors)
{
  if (anchors.empty()) {
    throw ConfigError("select_winner: no anchors");
  }
  std::size_t best = 0;
  double best_d = sq_dist(gt, anchors[0]);
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    const double d = sq_dist(gt, anchors[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

KMeansResult kmeans(std::span<const Point2D> points, std::size_t k, std::uint64_t seed, std::size_t max_iterations)
{
  if (k == 0 || k > points.size()) {
    throw ConfigError(
      "k-means: need 1 <= k <= points (k=" + std::to_string(k) + ", points=" +
      std::to_string(points.size()) + ")");
  }
  Rng rng(seed);
  KMeansResult res;
  res.centers.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size());
  while (res.centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point2D & c : res.centers) {
        best = std::min(best, sq_dist(points[i], c));
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(points.size());
    }
    res.centers.push_back(points[pick]);
  }

  res.assignment.assign(points.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t a = select_winner(points[i], res.centers);
      changed = changed || a != res.assignment[i];
      res.assignment[i] = a;
      inertia += sq_dist(points[i], res.centers[a]);
    }
    res.inertia.push_back(inertia);
    if (!changed) {
      break;
    }
    std::vector<Point2D> sum(k);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sum[res.assignment[i]].x += points[i].x;
      sum[res.assignment[i]].y += points[i].y;
      ++count[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        res.centers[c] = {sum[c].x / static_cast<double>(count[c]), sum[c].y / static_cast<double>(count[c])};
      }
    }
  }
  return res;
}

std::vector<Point2D> collect_endpoints(
  const std::vector<SceneSample> & scenes, const ModelConfig & config, int horizon, int agent_type)
{
  std::vector<Point2D> out;
  for (const SceneSample & scene : scenes) {
    const int intervals = scene.total_steps() / config.t_token;
    for (const AgentTrack & track : scene.agents) {
      if (!track.is_focal && track.is_static) {
        continue;
      }
      if (agent_type >= 0 && static_cast<int>(track.type) != agent_type) {
        continue;
      }
      for (int i = 0; i < intervals; ++i) {
        const std::optional<Pose2D> frame = agent_interval_frame(track, i, config.t_token);
        const std::size_t target = static_cast<std::size_t>((i + 1) * config.t_token - 1 + horizon);
        if (!frame || target >= track.states.size() || !track.states[target].valid) {
          continue;
        }
        const AgentState & s = track.states[target];
        out.push_back(to_local(*frame, Point2D{s.x, s.y}));
      }
    }
  }
  return out;
}

AnchorSet fit_anchors(const std::vector<SceneSample> & scenes, const ModelConfig & config, std::uint64_t seed)
{
  AnchorSet set;
  const std::vector<Point2D> long_pts = collect_endpoints(scenes, config, config.t_future);
  const std::vector<Point2D> short_pts = collect_endpoints(scenes, config, config.t_token);
  const std::vector<Point2D> shared = kmeans(long_pts, config.k_long, seed).centers;
  set.short_anchors = kmeans(short_pts, config.k_short, seed + 1).centers;
  if (!config.anchors_per_type) {
    set.long_anchors = {shared};
    return set;
  }
  for (std::size_t t = 0; t < kNumAgentTypes; ++t) {
    const std::vector<Point2D> pts = collect_endpoints(scenes, config, config.t_future, static_cast<int>(t));
    set.long_anchors.push_back(pts.size() >= config.k_long ? kmeans(pts, config.k_long, seed + 2 + t).centers : shared);
  }
  return set;
}

}  // namespace amp
