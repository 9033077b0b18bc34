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

#ifndef AMP__SCENE_HPP_
#define AMP__SCENE_HPP_

#include "amp/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace amp
{

enum class AgentType { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
inline constexpr std::size_t kNumAgentTypes = 3;

enum class PolylineType { kLane = 0, kBoundary = 1, kCrosswalk = 2 };
inline constexpr std::size_t kNumPolylineTypes = 3;

/// One time-step of an agent track. Invalid steps are zero-filled.
struct AgentState
{
  double x{0.0};
  double y{0.0};
  double vx{0.0};
  double vy{0.0};
  double heading{0.0};
  bool valid{false};

  bool operator==(const AgentState &) const = default;
};

struct AgentTrack
{
  std::int64_t id{0};
  AgentType type{AgentType::kVehicle};
  std::vector<AgentState> states;
  bool is_focal{false};
  /// Total displacement between first and last valid step below 1 m.
  bool is_static{false};

  bool operator==(const AgentTrack &) const = default;
};

struct MapPolyline
{
  std::int64_t id{0};
  PolylineType type{PolylineType::kLane};
  std::vector<Point2D> points;

  bool operator==(const MapPolyline &) const = default;
};

struct SceneSample
{
  std::string scene_id;
  std::vector<AgentTrack> agents;
  std::vector<MapPolyline> map;
  double dt{0.2};
  int t_obs{10};
  int t_future{40};

  int total_steps() const { return t_obs + t_future; }
  bool operator==(const SceneSample &) const = default;
};

/// Static threshold on total displacement, meters.
inline constexpr double kStaticDisplacement = 1.0;

bool compute_is_static(const AgentTrack & track);

/**
 * @brief Checks every SceneSample invariant; throws ValidationError naming the field.
 */
void validate_scene(const SceneSample & scene);

enum class ScenarioKind { kStraight, kTurn, kCutIn, kPedestrianCross };

/// Throws UsageError on an unknown name.
ScenarioKind parse_scenario_kind(const std::string & name);
std::string to_string(ScenarioKind kind);
std::string to_string(AgentType type);
std::string to_string(PolylineType type);

struct SceneGenConfig
{
  double dt{0.2};
  int t_obs{10};
  int t_future{40};
};

/**
 * @brief Deterministic synthetic scene of the given kind.
 *
 * Positions integrate velocities exactly (v_t = (p_t - p_{t-1}) / dt), headings
 * follow the velocity direction above 0.1 m/s, and lanes are laid under every
 * vehicle path. The whole scene is placed under a seeded random rigid motion.
 */
SceneSample generate_scene(ScenarioKind kind, std::uint64_t seed, const SceneGenConfig & config = {});

/// Applies a global rigid motion to every position, velocity, heading and map point.
SceneSample transform_scene(const SceneSample & scene, const Pose2D & motion);

/**
 * @brief Focal agents plus up to `max_extra_nonfocal` non-static non-focal agents,
 * sampled without replacement. Focal ids come first in scene order; sampled extras
 * follow in scene order.
 */
std::vector<std::int64_t> select_training_agents(
  const SceneSample & scene, std::size_t max_extra_nonfocal, std::uint64_t seed);

/// Current JSONL record version.
inline constexpr int kSceneFormatVersion = 1;

std::string scene_to_json_line(const SceneSample & scene);
/// Parses and validates one record; `line` is used in error messages.
SceneSample scene_from_json_line(const std::string & text, std::size_t line = 1);
void save_scenes(const std::vector<SceneSample> & scenes, const std::string & path);
std::vector<SceneSample> load_scenes(const std::string & path);

}  // namespace amp

#endif  // AMP__SCENE_HPP_
