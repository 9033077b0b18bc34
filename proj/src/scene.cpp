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

#include "amp/scene.hpp"

#include "amp/errors.hpp"
#include "amp/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

namespace amp
{

using json = nlohmann::json;

bool compute_is_static(const AgentTrack & track)
{
  const AgentState * first = nullptr;
  const AgentState * last = nullptr;
  for (const AgentState & s : track.states) {
    if (s.valid) {
      if (!first) {
        first = &s;
      }
      last = &s;
    }
  }
  if (!first) {
    return true;
  }
  return std::hypot(last->x - first->x, last->y - first->y) < kStaticDisplacement;
}

void validate_scene(const SceneSample & scene)
{
  if (!(scene.dt > 0.0) || !std::isfinite(scene.dt)) {
    throw ValidationError("dt", "must be positive and finite");
  }
  if (scene.t_obs < 1) {
    throw ValidationError("t_obs", "must be >= 1");
  }
  if (scene.t_future < 1) {
    throw ValidationError("t_future", "must be >= 1");
  }
  const std::size_t steps = static_cast<std::size_t>(scene.total_steps());
  bool any_focal = false;
  std::set<std::int64_t> ids;
  for (std::size_t a = 0; a < scene.agents.size(); ++a) {
    const AgentTrack & t = scene.agents[a];
    const std::string prefix = "agents[" + std::to_string(a) + "]";
    if (!ids.insert(t.id).second) {
      throw ValidationError(prefix + ".id", "duplicate agent id " + std::to_string(t.id));
    }
    if (t.states.size() != steps) {
      throw ValidationError(
        prefix + ".states", "expected " + std::to_string(steps) + " steps, got " +
                              std::to_string(t.states.size()));
    }
    for (std::size_t s = 0; s < steps; ++s) {
      const AgentState & st = t.states[s];
      const std::string field = prefix + ".states[" + std::to_string(s) + "]";
      if (!std::isfinite(st.x) || !std::isfinite(st.y) || !std::isfinite(st.vx) ||
          !std::isfinite(st.vy) || !std::isfinite(st.heading)) {
        throw ValidationError(field, "non-finite value");
      }
      if (st.heading <= -M_PI || st.heading > M_PI) {
        throw ValidationError(field + ".heading", "not wrapped to (-pi, pi]");
      }
    }
    if (t.is_static != compute_is_static(t)) {
      throw ValidationError(prefix + ".is_static", "inconsistent with track displacement");
    }
    any_focal = any_focal || t.is_focal;
  }
  if (!any_focal) {
    throw ValidationError("agents", "scene needs at least one focal agent");
  }
  std::set<std::int64_t> map_ids;
  for (std::size_t m = 0; m < scene.map.size(); ++m) {
    const MapPolyline & p = scene.map[m];
    const std::string prefix = "map[" + std::to_string(m) + "]";
    if (!map_ids.insert(p.id).second) {
      throw ValidationError(prefix + ".id", "duplicate polyline id");
    }
    if (p.points.size() < 2) {
      throw ValidationError(prefix + ".points", "needs at least 2 points");
    }
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      if (!std::isfinite(p.points[i].x) || !std::isfinite(p.points[i].y)) {
        throw ValidationError(prefix + ".points", "non-finite point");
      }
      if (i > 0 && p.points[i] == p.points[i - 1]) {
        throw ValidationError(prefix + ".points", "consecutive points coincide");
      }
    }
  }
}

// --- names -------------------------------------------------------------------------

ScenarioKind parse_scenario_kind(const std::string & name)
{
  if (name == "straight") {
    return ScenarioKind::kStraight;
  }
  if (name == "turn") {
    return ScenarioKind::kTurn;
  }
  if (name == "cut_in") {
    return ScenarioKind::kCutIn;
  }
  if (name == "pedestrian_cross") {
    return ScenarioKind::kPedestrianCross;
  }
  throw UsageError("unknown scenario kind '" + name + "' (straight|turn|cut_in|pedestrian_cross)");
}

std::string to_string(ScenarioKind kind)
{
  switch (kind) {
    case ScenarioKind::kStraight:
      return "straight";
    case ScenarioKind::kTurn:
      return "turn";
    case ScenarioKind::kCutIn:
      return "cut_in";
    case ScenarioKind::kPedestrianCross:
      return "pedestrian_cross";
  }
  return "unknown";
}

std::string to_string(AgentType type)
{
  switch (type) {
    case AgentType::kVehicle:
      return "vehicle";
    case AgentType::kPedestrian:
      return "pedestrian";
    case AgentType::kCyclist:
      return "cyclist";
  }
  return "unknown";
}

std::string to_string(PolylineType type)
{
  switch (type) {
    case PolylineType::kLane:
      return "lane";
    case PolylineType::kBoundary:
      return "boundary";
    case PolylineType::kCrosswalk:
      return "crosswalk";
  }
  return "unknown";
}

namespace
{
AgentType parse_agent_type(const std::string & s, const std::string & field)
{
  if (s == "vehicle") {
    return AgentType::kVehicle;
  }
  if (s == "pedestrian") {
    return AgentType::kPedestrian;
  }
  if (s == "cyclist") {
    return AgentType::kCyclist;
  }
  throw ValidationError(field, "unknown agent type '" + s + "'");
}

PolylineType parse_polyline_type(const std::string & s, const std::string & field)
{
  if (s == "lane") {
    return PolylineType::kLane;
  }
  if (s == "boundary") {
    return PolylineType::kBoundary;
  }
  if (s == "crosswalk") {
    return PolylineType::kCrosswalk;
  }
  throw ValidationError(field, "unknown polyline type '" + s + "'");
}

// --- generator helpers ---------------------------------------------------------------

constexpr double kLaneWidth = 3.5;
constexpr double kHeadingSpeed = 0.1;

/// Track from sampled positions: backward-difference velocities, heading along velocity.
AgentTrack make_track(
  std::int64_t id, AgentType type, const std::vector<Point2D> & pos, double initial_heading,
  double dt, bool focal)
{
  AgentTrack t;
  t.id = id;
  t.type = type;
  t.is_focal = focal;
  t.states.resize(pos.size());
  double heading = wrap_angle(initial_heading);
  for (std::size_t s = 0; s < pos.size(); ++s) {
    AgentState & st = t.states[s];
    st.x = pos[s].x;
    st.y = pos[s].y;
    const std::size_t a = s == 0 ? 0 : s - 1;
    const std::size_t b = s == 0 ? std::min<std::size_t>(1, pos.size() - 1) : s;
    st.vx = (pos[b].x - pos[a].x) / dt;
    st.vy = (pos[b].y - pos[a].y) / dt;
    if (std::hypot(st.vx, st.vy) > kHeadingSpeed) {
      heading = std::atan2(st.vy, st.vx);
    }
    st.heading = heading;
    st.valid = true;
  }
  t.is_static = compute_is_static(t);
  return t;
}

/// Resamples a dense path every `spacing` meters and splits it into polylines of `points` points.
void add_polylines(
  std::vector<MapPolyline> & map, const std::vector<Point2D> & dense, PolylineType type,
  double spacing = 4.0, std::size_t points = 11)
{
  std::vector<Point2D> sampled{dense.front()};
  double carry = 0.0;
  for (std::size_t i = 1; i < dense.size(); ++i) {
    const double seg = std::hypot(dense[i].x - dense[i - 1].x, dense[i].y - dense[i - 1].y);
    double s = spacing - carry;
    while (s <= seg) {
      const double u = s / seg;
      sampled.push_back(
        {dense[i - 1].x + u * (dense[i].x - dense[i - 1].x), dense[i - 1].y + u * (dense[i].y - dense[i - 1].y)});
      s += spacing;
    }
    carry = seg - (s - spacing);
  }
  for (std::size_t start = 0; start + 1 < sampled.size(); start += points - 1) {
    MapPolyline p;
    p.id = 1000 + static_cast<std::int64_t>(map.size());
    p.type = type;
    const std::size_t end = std::min(sampled.size(), start + points);
    p.points.assign(sampled.begin() + static_cast<std::ptrdiff_t>(start), sampled.begin() + static_cast<std::ptrdiff_t>(end));
    if (p.points.size() >= 2) {
      map.push_back(std::move(p));
    }
  }
}

std::vector<Point2D> straight_line(Point2D a, Point2D b)
{
  return {a, b};
}

double smoothstep(double u)
{
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

std::vector<Point2D> sample(int steps, const std::function<Point2D(int)> & f)
{
  std::vector<Point2D> out(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    out[static_cast<std::size_t>(s)] = f(s);
  }
  return out;
}

/// Point at arc length s along: straight for `l1`, arc of `radius` turning by `sweep` (signed), then straight.
Point2D turn_path(double s, double l1, double radius, double sweep)
{
  if (s <= l1) {
    return {s, 0.0};
  }
  const double arc = radius * std::abs(sweep);
  const double sign = sweep > 0.0 ? 1.0 : -1.0;
  if (s <= l1 + arc) {
    const double phi = (s - l1) / radius;
    return {l1 + radius * std::sin(phi), sign * radius * (1.0 - std::cos(phi))};
  }
  const Point2D end{l1 + radius * std::sin(std::abs(sweep)), sign * radius * (1.0 - std::cos(sweep))};
  const double heading = sweep;
  const double rest = s - l1 - arc;
  return {end.x + rest * std::cos(heading), end.y + rest * std::sin(heading)};
}

SceneSample scenario_straight(Rng & rng, const SceneGenConfig & c, int steps)
{
  SceneSample sc;
  const double v = rng.uniform(6.0, 12.0);
  const double dt = c.dt;
  sc.agents.push_back(make_track(
    1, AgentType::kVehicle, sample(steps, [&](int s) { return Point2D{v * dt * s, 0.0}; }), 0.0,
    dt, true));
  const double lead_gap = rng.uniform(20.0, 35.0);
  const double v_lead = rng.uniform(v - 1.0, v + 2.0);
  sc.agents.push_back(make_track(
    2, AgentType::kVehicle,
    sample(steps, [&](int s) { return Point2D{lead_gap + v_lead * dt * s, 0.0}; }), 0.0, dt, false));
  const double adj_x = rng.uniform(-20.0, 20.0);
  const double v_adj = rng.uniform(5.0, 13.0);
  sc.agents.push_back(make_track(
    3, AgentType::kVehicle,
    sample(steps, [&](int s) { return Point2D{adj_x + v_adj * dt * s, kLaneWidth}; }), 0.0, dt,
    false));
  const double park_x = rng.uniform(10.0, 80.0);
  sc.agents.push_back(make_track(
    4, AgentType::kVehicle, sample(steps, [&](int) { return Point2D{park_x, -kLaneWidth}; }), 0.0,
    dt, false));
  const double x_end = std::max(v, v_adj) * dt * steps + 40.0;
  add_polylines(sc.map, straight_line({-30.0, 0.0}, {x_end, 0.0}), PolylineType::kLane);
  add_polylines(sc.map, straight_line({-30.0, kLaneWidth}, {x_end, kLaneWidth}), PolylineType::kLane);
  add_polylines(
    sc.map, straight_line({-30.0, -0.5 * kLaneWidth}, {x_end, -0.5 * kLaneWidth}),
    PolylineType::kBoundary, 8.0, 6);
  return sc;
}

SceneSample scenario_turn(Rng & rng, const SceneGenConfig & c, int steps)
{
  SceneSample sc;
  const double dt = c.dt;
  const double v = rng.uniform(5.0, 8.0);
  const double l1 = rng.uniform(15.0, 30.0);
  const double radius = rng.uniform(10.0, 20.0);
  const double sweep = (rng.bernoulli(0.5) ? 1.0 : -1.0) * M_PI / 2.0;
  sc.agents.push_back(make_track(
    1, AgentType::kVehicle, sample(steps, [&](int s) { return turn_path(v * dt * s, l1, radius, sweep); }),
    0.0, dt, true));
  // Cross traffic on the road being turned into, far enough to stay clear.
  const double sign = sweep > 0.0 ? 1.0 : -1.0;
  const double cross_x = l1 + radius + kLaneWidth;
  const double v_cross = rng.uniform(4.0, 9.0);
  const double cross_y0 = sign * rng.uniform(40.0, 60.0);
  sc.agents.push_back(make_track(
    2, AgentType::kVehicle,
    sample(steps, [&](int s) { return Point2D{cross_x, cross_y0 + sign * v_cross * dt * s}; }),
    sign * M_PI / 2.0, dt, false));
  const double ped_x = rng.uniform(0.0, l1);
  const double ped_v = rng.uniform(0.8, 1.5);
  sc.agents.push_back(make_track(
    3, AgentType::kPedestrian,
    sample(steps, [&](int s) { return Point2D{ped_x + ped_v * dt * s, -sign * 6.0}; }), 0.0, dt,
    false));
  const double total = v * dt * steps + 30.0;
  std::vector<Point2D> lane;
  for (double s = -30.0; s <= total; s += 1.0) {
    lane.push_back(s < 0.0 ? Point2D{s, 0.0} : turn_path(s, l1, radius, sweep));
  }
  add_polylines(sc.map, lane, PolylineType::kLane);
  add_polylines(sc.map, straight_line({-30.0, 0.0}, {l1 + 60.0, 0.0}), PolylineType::kLane);
  add_polylines(
    sc.map, straight_line({cross_x, cross_y0 - sign * 10.0}, {cross_x, cross_y0 + sign * (v_cross * dt * steps + 20.0)}),
    PolylineType::kLane);
  return sc;
}

SceneSample scenario_cut_in(Rng & rng, const SceneGenConfig & c, int steps)
{
  SceneSample sc;
  const double dt = c.dt;
  const double va = rng.uniform(8.0, 12.0);
  const double vb = va + rng.uniform(0.0, 1.5);
  const double xb = rng.uniform(6.0, 14.0);
  const int change_start = c.t_obs + static_cast<int>(rng.index(10)) + 1;
  const int change_len = 15;
  sc.agents.push_back(make_track(
    1, AgentType::kVehicle, sample(steps, [&](int s) { return Point2D{va * dt * s, 0.0}; }), 0.0, dt,
    true));
  sc.agents.push_back(make_track(
    2, AgentType::kVehicle,
    sample(
      steps,
      [&](int s) {
        const double u = static_cast<double>(s - change_start) / change_len;
        return Point2D{xb + vb * dt * s, kLaneWidth * (1.0 - smoothstep(u))};
      }),
    0.0, dt, true));
  const double lead_gap = rng.uniform(40.0, 55.0);
  sc.agents.push_back(make_track(
    3, AgentType::kVehicle,
    sample(steps, [&](int s) { return Point2D{lead_gap + va * dt * s, 0.0}; }), 0.0, dt, false));
  const double x_end = vb * dt * steps + 60.0;
  add_polylines(sc.map, straight_line({-30.0, 0.0}, {x_end, 0.0}), PolylineType::kLane);
  add_polylines(sc.map, straight_line({-30.0, kLaneWidth}, {x_end, kLaneWidth}), PolylineType::kLane);
  return sc;
}

SceneSample scenario_pedestrian_cross(Rng & rng, const SceneGenConfig & c, int steps)
{
  SceneSample sc;
  const double dt = c.dt;
  const double xc = rng.uniform(25.0, 35.0);
  const double ped_speed = rng.uniform(1.2, 1.6);
  const int ped_start = static_cast<int>(rng.index(15));
  sc.agents.push_back(make_track(
    1, AgentType::kPedestrian,
    sample(
      steps,
      [&](int s) {
        const double walk = s > ped_start ? ped_speed * dt * (s - ped_start) : 0.0;
        return Point2D{xc, -5.0 + walk};
      }),
    M_PI / 2.0, dt, true));
  // Vehicle cruises, then brakes uniformly to stop short of the crosswalk.
  const double v = rng.uniform(7.0, 10.0);
  const double x_stop = xc - 6.0;
  const double brake_dist = rng.uniform(15.0, 25.0);
  const int brake_step = 5 + static_cast<int>(rng.index(10));
  const double decel = v * v / (2.0 * brake_dist);
  const double x0 = x_stop - brake_dist - v * dt * brake_step;
  sc.agents.push_back(make_track(
    2, AgentType::kVehicle,
    sample(
      steps,
      [&](int s) {
        if (s <= brake_step) {
          return Point2D{x0 + v * dt * s, 0.0};
        }
        const double t = std::min(dt * (s - brake_step), v / decel);
        return Point2D{x_stop - brake_dist + v * t - 0.5 * decel * t * t, 0.0};
      }),
    0.0, dt, true));
  const double cyc_x = rng.uniform(-30.0, 0.0);
  const double cyc_v = rng.uniform(3.5, 5.0);
  sc.agents.push_back(make_track(
    3, AgentType::kCyclist,
    sample(steps, [&](int s) { return Point2D{cyc_x + cyc_v * dt * s, -2.5}; }), 0.0, dt, false));
  sc.agents.push_back(make_track(
    4, AgentType::kVehicle,
    sample(steps, [&](int) { return Point2D{xc + 12.0, kLaneWidth + 3.0}; }), M_PI, dt, false));
  add_polylines(sc.map, straight_line({x0 - 20.0, 0.0}, {xc + 60.0, 0.0}), PolylineType::kLane);
  add_polylines(
    sc.map, straight_line({xc + 60.0, kLaneWidth}, {x0 - 20.0, kLaneWidth}), PolylineType::kLane);
  MapPolyline cw;
  cw.id = 1000 + static_cast<std::int64_t>(sc.map.size());
  cw.type = PolylineType::kCrosswalk;
  cw.points = {{xc - 2.0, -3.0}, {xc + 2.0, -3.0}, {xc + 2.0, 6.5}, {xc - 2.0, 6.5}, {xc - 2.0, -3.0}};
  sc.map.push_back(cw);
  return sc;
}

/// Drops one early observed step of some non-focal agents (never the last observed step).
void drop_observations(SceneSample & sc, Rng & rng)
{
  for (AgentTrack & t : sc.agents) {
    if (t.is_focal || sc.t_obs < 3 || !rng.bernoulli(0.25)) {
      continue;
    }
    const std::size_t s = rng.index(static_cast<std::uint64_t>(sc.t_obs - 2));
    t.states[s] = AgentState{};
    t.is_static = compute_is_static(t);
  }
}

/// Re-derives velocities from transformed positions so integration stays exact.
void refresh_kinematics(AgentTrack & t, double dt)
{
  const std::size_t n = t.states.size();
  for (std::size_t s = 0; s < n; ++s) {
    AgentState & st = t.states[s];
    if (!st.valid) {
      continue;
    }
    std::size_t a = s;
    std::size_t b = s;
    if (s > 0 && t.states[s - 1].valid) {
      a = s - 1;
    } else if (s + 1 < n && t.states[s + 1].valid) {
      b = s + 1;
    }
    if (a != b) {
      st.vx = (t.states[b].x - t.states[a].x) / dt;
      st.vy = (t.states[b].y - t.states[a].y) / dt;
    }
  }
}
}  // namespace

SceneSample generate_scene(ScenarioKind kind, std::uint64_t seed, const SceneGenConfig & config)
{
  if (config.t_obs < 1 || config.t_future < 1 || !(config.dt > 0.0)) {
    throw UsageError("generate_scene: invalid step configuration");
  }
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind) + 1);
  const int steps = config.t_obs + config.t_future;
  SceneSample sc;
  switch (kind) {
    case ScenarioKind::kStraight:
      sc = scenario_straight(rng, config, steps);
      break;
    case ScenarioKind::kTurn:
      sc = scenario_turn(rng, config, steps);
      break;
    case ScenarioKind::kCutIn:
      sc = scenario_cut_in(rng, config, steps);
      break;
    case ScenarioKind::kPedestrianCross:
      sc = scenario_pedestrian_cross(rng, config, steps);
      break;
  }
  sc.scene_id = to_string(kind) + "-" + std::to_string(seed);
  sc.dt = config.dt;
  sc.t_obs = config.t_obs;
  sc.t_future = config.t_future;
  drop_observations(sc, rng);
  const Pose2D placement = Pose2D::make(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(-M_PI, M_PI));
  sc = transform_scene(sc, placement);
  for (AgentTrack & t : sc.agents) {
    refresh_kinematics(t, sc.dt);
  }
  validate_scene(sc);
  return sc;
}

SceneSample transform_scene(const SceneSample & scene, const Pose2D & motion)
{
  SceneSample out = scene;
  for (AgentTrack & t : out.agents) {
    for (AgentState & s : t.states) {
      if (!s.valid) {
        continue;
      }
      const Point2D p = apply_pose(motion, {s.x, s.y});
      const Point2D v = rotate({s.vx, s.vy}, motion.theta);
      s.x = p.x;
      s.y = p.y;
      s.vx = v.x;
      s.vy = v.y;
      s.heading = wrap_angle(s.heading + motion.theta);
    }
  }
  for (MapPolyline & m : out.map) {
    for (Point2D & p : m.points) {
      p = apply_pose(motion, p);
    }
  }
  return out;
}

std::vector<std::int64_t> select_training_agents(
  const SceneSample & scene, std::size_t max_extra_nonfocal, std::uint64_t seed)
{
  std::vector<std::int64_t> out;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const AgentTrack & t = scene.agents[i];
    if (t.is_focal) {
      out.push_back(t.id);
    } else if (!t.is_static) {
      candidates.push_back(i);
    }
  }
  Rng rng(seed);
  const std::size_t take = std::min(max_extra_nonfocal, candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t i : candidates) {
    out.push_back(scene.agents[i].id);
  }
  return out;
}

// --- JSONL -------------------------------------------------------------------------------

std::string scene_to_json_line(const SceneSample & scene)
{
  json j;
  j["format_version"] = kSceneFormatVersion;
  j["scene_id"] = scene.scene_id;
  j["dt"] = scene.dt;
  j["t_obs"] = scene.t_obs;
  j["t_future"] = scene.t_future;
  json agents = json::array();
  for (const AgentTrack & t : scene.agents) {
    json states = json::array();
    for (const AgentState & s : t.states) {
      states.push_back({s.x, s.y, s.vx, s.vy, s.heading, s.valid ? 1 : 0});
    }
    agents.push_back(
      {{"id", t.id},
       {"type", to_string(t.type)},
       {"is_focal", t.is_focal},
       {"is_static", t.is_static},
       {"states", std::move(states)}});
  }
  j["agents"] = std::move(agents);
  json map = json::array();
  for (const MapPolyline & m : scene.map) {
    json pts = json::array();
    for (const Point2D & p : m.points) {
      pts.push_back({p.x, p.y});
    }
    map.push_back({{"id", m.id}, {"type", to_string(m.type)}, {"points", std::move(pts)}});
  }
  j["map"] = std::move(map);
  return j.dump();
}

namespace
{
template <typename T>
T field(const json & j, const char * key, const std::string & path)
{
  if (!j.contains(key)) {
    throw ValidationError(path + key, "missing");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception & e) {
    throw ValidationError(path + key, e.what());
  }
}
}  // namespace

SceneSample scene_from_json_line(const std::string & text, std::size_t line)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error & e) {
    throw ParseError(e.what(), line);
  }
  if (!j.is_object()) {
    throw ParseError("expected a JSON object", line);
  }
  const int version = field<int>(j, "format_version", "");
  if (version != kSceneFormatVersion) {
    throw ValidationError("format_version", "unsupported version " + std::to_string(version));
  }
  SceneSample sc;
  sc.scene_id = field<std::string>(j, "scene_id", "");
  sc.dt = field<double>(j, "dt", "");
  sc.t_obs = field<int>(j, "t_obs", "");
  sc.t_future = field<int>(j, "t_future", "");
  const json agents = field<json>(j, "agents", "");
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const json & ja = agents[a];
    const std::string p = "agents[" + std::to_string(a) + "].";
    AgentTrack t;
    t.id = field<std::int64_t>(ja, "id", p);
    t.type = parse_agent_type(field<std::string>(ja, "type", p), p + "type");
    t.is_focal = field<bool>(ja, "is_focal", p);
    t.is_static = field<bool>(ja, "is_static", p);
    const json states = field<json>(ja, "states", p);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const json & js = states[s];
      if (!js.is_array() || js.size() != 6) {
        throw ValidationError(p + "states[" + std::to_string(s) + "]", "expected 6 values");
      }
      AgentState st;
      st.x = js[0].get<double>();
      st.y = js[1].get<double>();
      st.vx = js[2].get<double>();
      st.vy = js[3].get<double>();
      st.heading = js[4].get<double>();
      st.valid = js[5].get<int>() != 0;
      t.states.push_back(st);
    }
    sc.agents.push_back(std::move(t));
  }
  const json map = field<json>(j, "map", "");
  for (std::size_t m = 0; m < map.size(); ++m) {
    const json & jm = map[m];
    const std::string p = "map[" + std::to_string(m) + "].";
    MapPolyline poly;
    poly.id = field<std::int64_t>(jm, "id", p);
    poly.type = parse_polyline_type(field<std::string>(jm, "type", p), p + "type");
    for (const json & pt : field<json>(jm, "points", p)) {
      if (!pt.is_array() || pt.size() != 2) {
        throw ValidationError(p + "points", "expected [x, y] pairs");
      }
      poly.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    sc.map.push_back(std::move(poly));
  }
  validate_scene(sc);
  return sc;
}

void save_scenes(const std::vector<SceneSample> & scenes, const std::string & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  for (const SceneSample & s : scenes) {
    out << scene_to_json_line(s) << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

std::vector<SceneSample> load_scenes(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::vector<SceneSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      out.push_back(scene_from_json_line(line, lineno));
    } catch (const ValidationError & e) {
      throw ValidationError(e.field(), std::string("line ") + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace amp
