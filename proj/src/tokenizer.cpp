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

#include "amp/tokenizer.hpp"

#include "amp/errors.hpp"

#include <cmath>

namespace amp
{

Pose2D map_frame(const MapPolyline & polyline)
{
  if (polyline.points.size() < 2) {
    throw GeometryError("map polyline needs at least 2 points");
  }
  const Point2D & a = polyline.points[0];
  const Point2D & b = polyline.points[1];
  if (a == b) {
    throw GeometryError("map polyline " + std::to_string(polyline.id) + ": first two points coincide");
  }
  return Pose2D::make(a.x, a.y, std::atan2(b.y - a.y, b.x - a.x));
}

std::optional<Pose2D> agent_interval_frame(const AgentTrack & track, int interval, int t_token)
{
  const std::size_t last = static_cast<std::size_t>((interval + 1) * t_token - 1);
  if (interval < 0 || last >= track.states.size() || !track.states[last].valid) {
    return std::nullopt;
  }
  const AgentState & s = track.states[last];
  return Pose2D::make(s.x, s.y, s.heading);
}

std::vector<double> map_point_features(const MapPolyline & polyline, const Pose2D & frame)
{
  std::vector<double> out(polyline.points.size() * kMapPointFeatures, 0.0);
  for (std::size_t i = 0; i < polyline.points.size(); ++i) {
    const Point2D p = to_local(frame, polyline.points[i]);
    double * row = out.data() + i * kMapPointFeatures;
    row[0] = p.x;
    row[1] = p.y;
    row[2 + static_cast<std::size_t>(polyline.type)] = 1.0;
  }
  return out;
}

std::vector<double> agent_interval_features(
  const AgentTrack & track, int interval, int t_token, const Pose2D & frame)
{
  const std::size_t n = static_cast<std::size_t>(t_token);
  const std::size_t first = static_cast<std::size_t>(interval) * n;
  if (first + n > track.states.size()) {
    throw ShapeError("agent interval beyond track length");
  }
  std::vector<double> out(n * kAgentPointFeatures, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState & s = track.states[first + i];
    double * row = out.data() + i * kAgentPointFeatures;
    row[6 + static_cast<std::size_t>(track.type)] = 1.0;
    if (!s.valid) {
      continue;
    }
    const Point2D p = to_local(frame, Point2D{s.x, s.y});
    const Point2D v = rotate({s.vx, s.vy}, -frame.theta);
    row[0] = p.x;
    row[1] = p.y;
    row[2] = v.x;
    row[3] = v.y;
    row[4] = wrap_angle(s.heading - frame.theta);
    row[5] = 1.0;
  }
  const double * last = out.data() + (n - 1) * kAgentPointFeatures;
  if (last[0] != 0.0 || last[1] != 0.0 || last[4] != 0.0) {
    throw GeometryError("interval frame does not map the final step to the local origin");
  }
  return out;
}

PointNet PointNet::create(
  ParamStore & store, const std::string & name, std::size_t in, std::size_t hidden,
  std::size_t out, Rng & rng)
{
  PointNet p;
  p.point_mlp = Mlp::create(store, name + ".point", {in, hidden, hidden}, rng);
  p.out_mlp = Mlp::create(store, name + ".out", {hidden, hidden, out}, rng);
  return p;
}

Tensor PointNet::forward(const Tensor & points, std::span<const std::size_t> offsets) const
{
  return out_mlp.forward(segment_max(point_mlp.forward(points), offsets));
}

Tokenizer Tokenizer::create(ParamStore & store, const ModelConfig & config, Rng & rng)
{
  Tokenizer t;
  t.config_ = config;
  t.map_net_ = PointNet::create(store, "tok.map", kMapPointFeatures, config.pointnet_hidden, config.hidden, rng);
  t.agent_net_ =
    PointNet::create(store, "tok.agent", kAgentPointFeatures, config.pointnet_hidden, config.hidden, rng);
  return t;
}

TokenBatch Tokenizer::encode_map(const std::vector<MapPolyline> & map) const
{
  TokenBatch batch;
  if (map.empty()) {
    batch.features = Tensor::zeros({0, config_.hidden});
    return batch;
  }
  std::vector<double> points;
  std::vector<std::size_t> offsets{0};
  for (const MapPolyline & poly : map) {
    TokenInfo info;
    info.frame = map_frame(poly);
    info.owner = poly.id;
    info.kind = TokenKind::kMap;
    const std::vector<double> f = map_point_features(poly, info.frame);
    points.insert(points.end(), f.begin(), f.end());
    offsets.push_back(offsets.back() + poly.points.size());
    batch.info.push_back(info);
  }
  batch.features =
    map_net_.forward(Tensor::from({offsets.back(), kMapPointFeatures}, std::move(points)), offsets);
  return batch;
}

TokenBatch Tokenizer::encode_intervals(std::span<const IntervalRef> intervals) const
{
  TokenBatch batch;
  std::vector<double> points;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> encoded_rows;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const IntervalRef & ref = intervals[i];
    TokenInfo info;
    info.temporal_index = ref.interval;
    info.owner = ref.track->id;
    info.kind = ref.kind;
    info.agent_type = ref.track->type;
    const std::optional<Pose2D> frame = agent_interval_frame(*ref.track, ref.interval, config_.t_token);
    info.valid = frame.has_value();
    if (frame) {
      info.frame = *frame;
      const std::vector<double> f =
        agent_interval_features(*ref.track, ref.interval, config_.t_token, *frame);
      points.insert(points.end(), f.begin(), f.end());
      offsets.push_back(offsets.back() + static_cast<std::size_t>(config_.t_token));
      encoded_rows.push_back(i);
    }
    batch.info.push_back(info);
  }
  if (encoded_rows.size() == intervals.size() && !intervals.empty()) {
    batch.features =
      agent_net_.forward(Tensor::from({offsets.back(), kAgentPointFeatures}, std::move(points)), offsets);
    return batch;
  }
  // Scatter encoded rows among zero rows for masked intervals.
  std::vector<Tensor> rows;
  Tensor encoded;
  if (!encoded_rows.empty()) {
    encoded =
      agent_net_.forward(Tensor::from({offsets.back(), kAgentPointFeatures}, std::move(points)), offsets);
  }
  const Tensor zero = Tensor::zeros({1, config_.hidden});
  std::size_t next = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (next < encoded_rows.size() && encoded_rows[next] == i) {
      const std::size_t idx[1] = {next++};
      rows.push_back(gather_rows(encoded, idx));
    } else {
      rows.push_back(zero);
    }
  }
  batch.features = rows.empty() ? Tensor::zeros({0, config_.hidden}) : concat_rows(rows);
  return batch;
}

std::vector<IntervalRef> Tokenizer::agent_intervals(const AgentTrack & track, bool with_future) const
{
  std::vector<IntervalRef> out;
  const int count = with_future ? config_.l_total() : config_.l_obs();
  for (int i = 0; i < count; ++i) {
    out.push_back({&track, i, i < config_.l_obs() ? TokenKind::kAgentObs : TokenKind::kAgentFuture});
  }
  return out;
}

}  // namespace amp
