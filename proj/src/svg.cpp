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

#include "amp/svg.hpp"

#include "amp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace amp
{

namespace
{
std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

/// Hue ramp from blue (first step) to red (last step).
std::string step_color(std::size_t step, std::size_t count)
{
  const double u = count > 1 ? static_cast<double>(step) / static_cast<double>(count - 1) : 0.0;
  const int r = static_cast<int>(std::lround(40.0 + 215.0 * u));
  const int g = static_cast<int>(std::lround(90.0 + 60.0 * std::sin(M_PI * u)));
  const int b = static_cast<int>(std::lround(255.0 - 215.0 * u));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const char * polyline_color(PolylineType t)
{
  switch (t) {
    case PolylineType::kLane:
      return "#9a9a9a";
    case PolylineType::kBoundary:
      return "#4d4d4d";
    case PolylineType::kCrosswalk:
      return "#c9a227";
  }
  return "#000000";
}

struct Bounds
{
  double min_x{std::numeric_limits<double>::infinity()};
  double min_y{std::numeric_limits<double>::infinity()};
  double max_x{-std::numeric_limits<double>::infinity()};
  double max_y{-std::numeric_limits<double>::infinity()};

  void add(const Point2D & p)
  {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

std::string points_attr(const std::vector<Point2D> & pts)
{
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) {
      s += ' ';
    }
    s += num(pts[i].x) + "," + num(-pts[i].y);
  }
  return s;
}
}  // namespace

std::string render_svg(const SceneSample & scene, const std::vector<AgentPrediction> & predictions)
{
  Bounds b;
  for (const MapPolyline & m : scene.map) {
    for (const Point2D & p : m.points) {
      b.add(p);
    }
  }
  for (const AgentTrack & t : scene.agents) {
    for (const AgentState & s : t.states) {
      if (s.valid) {
        b.add({s.x, s.y});
      }
    }
  }
  for (const AgentPrediction & p : predictions) {
    if (p.scene_id != scene.scene_id) {
      throw ValidationError("scene_id", "prediction for '" + p.scene_id + "' does not match scene '" + scene.scene_id + "'");
    }
    const bool known = std::any_of(
      scene.agents.begin(), scene.agents.end(), [&](const AgentTrack & t) { return t.id == p.agent_id; });
    if (!known) {
      throw ValidationError(
        "agent_id", "prediction for agent " + std::to_string(p.agent_id) + " not in scene '" + scene.scene_id + "'");
    }
    for (const ModeTrajectory & m : p.modes) {
      for (const Point2D & w : m.waypoints) {
        b.add(w);
      }
    }
  }
  if (!std::isfinite(b.min_x)) {
    b = Bounds{};
    b.add({-10.0, -10.0});
    b.add({10.0, 10.0});
  }
  const double margin = 5.0;
  const double w = b.max_x - b.min_x + 2 * margin;
  const double h = b.max_y - b.min_y + 2 * margin;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + num(b.min_x - margin) + " " +
                    num(-b.max_y - margin) + " " + num(w) + " " + num(h) + "\" width=\"" +
                    num(std::min(1200.0, 8.0 * w)) + "\" height=\"" + num(std::min(1200.0, 8.0 * w) * h / w) + "\">\n";
  svg += "<title>" + scene.scene_id + "</title>\n";
  svg += "<rect x=\"" + num(b.min_x - margin) + "\" y=\"" + num(-b.max_y - margin) + "\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" fill=\"#ffffff\"/>\n";

  svg += "<g class=\"map\" fill=\"none\" stroke-width=\"0.3\">\n";
  for (const MapPolyline & m : scene.map) {
    svg += "<polyline stroke=\"" + std::string(polyline_color(m.type)) + "\" points=\"" + points_attr(m.points) + "\"/>\n";
  }
  svg += "</g>\n";

  svg += "<g class=\"tracks\" fill=\"none\" stroke-width=\"0.25\">\n";
  for (const AgentTrack & t : scene.agents) {
    std::vector<Point2D> obs;
    std::vector<Point2D> fut;
    for (std::size_t s = 0; s < t.states.size(); ++s) {
      if (!t.states[s].valid) {
        continue;
      }
      const Point2D p{t.states[s].x, t.states[s].y};
      (static_cast<int>(s) < scene.t_obs ? obs : fut).push_back(p);
    }
    if (!obs.empty()) {
      fut.insert(fut.begin(), obs.back());
    }
    const std::string color = t.is_focal ? "#202020" : "#7f7f7f";
    if (obs.size() >= 2) {
      svg += "<polyline stroke=\"" + color + "\" points=\"" + points_attr(obs) + "\"/>\n";
    }
    if (fut.size() >= 2) {
      svg += "<polyline stroke=\"" + color + "\" stroke-dasharray=\"0.6,0.4\" points=\"" + points_attr(fut) + "\"/>\n";
    }
  }
  svg += "</g>\n";

  for (const AgentPrediction & p : predictions) {
    double max_score = 0.0;
    for (const ModeTrajectory & m : p.modes) {
      max_score = std::max(max_score, m.score);
    }
    for (const ModeTrajectory & m : p.modes) {
      const double opacity = max_score > 0.0 ? 0.15 + 0.85 * m.score / max_score : 1.0;
      svg += "<g class=\"mode\" data-agent=\"" + std::to_string(p.agent_id) + "\" data-mode=\"" +
             std::to_string(m.mode) + "\" data-score=\"" + num(m.score) + "\" opacity=\"" + num(opacity) + "\">\n";
      svg += "<polyline fill=\"none\" stroke=\"#555555\" stroke-width=\"0.15\" points=\"" + points_attr(m.waypoints) + "\"/>\n";
      for (std::size_t i = 0; i < m.waypoints.size(); ++i) {
        svg += "<circle cx=\"" + num(m.waypoints[i].x) + "\" cy=\"" + num(-m.waypoints[i].y) +
               "\" r=\"0.35\" fill=\"" + step_color(i, m.waypoints.size()) + "\"/>\n";
      }
      svg += "</g>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace amp
