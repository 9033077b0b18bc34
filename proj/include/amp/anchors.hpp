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


#ifndef AMP__ANCHORS_HPP_
#define AMP__ANCHORS_HPP_

#include "amp/config.hpp"
#include "amp/scene.hpp"

#include <cstdint>
#include <vector>

namespace amp
{

struct KMeansResult
{
  std::vector<Point2D> centers;
  std::vector<std::size_t> assignment;
  /// Inertia after every assignment step, in order.
  std::vector<double> inertia;
};

/**
 * @brief Lloyd's k-means with seeded k-means++ initialization.
 *
 * Iterates until the assignment stops changing or `max_iterations` assignment
 * steps have run. Points tie to the lower-indexed center; an empty cluster
 * keeps its previous center. Throws ConfigError when k is 0 or exceeds the point count.
 */
KMeansResult kmeans(
  std::span<const Point2D> points, std::size_t k, std::uint64_t seed, std::size_t max_iterations = 100);

/// Index of the nearest anchor; ties go to the smaller index.
std::size_t select_winner(const Point2D & gt, std::span<const Point2D> anchors);

struct AnchorSet
{
  /// One set shared by all agent types, or one per AgentType when fitted per type.
  std::vector<std::vector<Point2D>> long_anchors;
  std::vector<Point2D> short_anchors;

  const std::vector<Point2D> & long_for(AgentType type) const
  {
    return long_anchors.size() == 1 ? long_anchors[0] : long_anchors[static_cast<std::size_t>(type)];
  }
};

/// Local-frame endpoints of every token with data at the given horizon.
std::vector<Point2D> collect_endpoints(
  const std::vector<SceneSample> & scenes, const ModelConfig & config, int horizon,
  int agent_type = -1);

/**
 * @brief Long anchors cluster endpoints at +t_future and short anchors at +t_token,
 * both in the token frame, over focal and non-static agents.
 *
 * With anchors.per_type, a type with fewer than k_long endpoints reuses the shared set.
 */
AnchorSet fit_anchors(const std::vector<SceneSample> & scenes, const ModelConfig & config, std::uint64_t seed);

}  // namespace amp

#endif  // AMP__ANCHORS_HPP_
