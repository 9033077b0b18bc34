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

#include "amp/inference.hpp"

#include "amp/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace amp
{

std::vector<double> fuse_weights(int t, std::size_t num_longs, double tau)
{
  std::vector<double> w(num_longs + 1);
  w[0] = std::pow(static_cast<double>(t), tau);
  for (std::size_t i = 0; i < num_longs; ++i) {
    w[i + 1] = std::pow(static_cast<double>(i), tau);
  }
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(sum > 0.0)) {
    std::fill(w.begin(), w.end(), 0.0);
    w[0] = 1.0;
    return w;
  }
  for (double & x : w) {
    x /= sum;
  }
  return w;
}

std::vector<Point2D> fuse(
  std::span<const Point2D> short_pred, const std::vector<std::vector<Point2D>> & stored_longs, int t,
  double tau)
{
  const std::size_t n = short_pred.size();
  if (t < 0 || stored_longs.size() > static_cast<std::size_t>(t) + 1) {
    throw ShapeError("fuse: more stored long predictions than elapsed steps");
  }
  for (std::size_t i = 0; i < stored_longs.size(); ++i) {
    if (stored_longs[i].size() < (static_cast<std::size_t>(t) - i + 1) * n) {
      throw ShapeError("fuse: stored long prediction too short for step " + std::to_string(t));
    }
  }
  const std::vector<double> w = fuse_weights(t, stored_longs.size(), tau);
  std::vector<Point2D> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double x = w[0] * short_pred[j].x;
    double y = w[0] * short_pred[j].y;
    for (std::size_t i = 0; i < stored_longs.size(); ++i) {
      const Point2D & p = stored_longs[i][(static_cast<std::size_t>(t) - i) * n + j];
      x += w[i + 1] * p.x;
      y += w[i + 1] * p.y;
    }
    out[j] = {x, y};
  }
  return out;
}

std::vector<std::size_t> nms_select(
  const std::vector<ModeTrajectory> & candidates, double dist_threshold, std::size_t out_count)
{
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  const std::size_t want = std::min(out_count, candidates.size());
  std::vector<std::size_t> selected;
  std::vector<bool> taken(candidates.size(), false);
  for (std::size_t idx : order) {
    if (selected.size() >= want) {
      break;
    }
    const Point2D & e = candidates[idx].waypoints.back();
    bool suppressed = false;
    for (std::size_t s : selected) {
      const Point2D & f = candidates[s].waypoints.back();
      if (std::hypot(e.x - f.x, e.y - f.y) <= dist_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      selected.push_back(idx);
      taken[idx] = true;
    }
  }
  for (std::size_t idx : order) {
    if (selected.size() >= want) {
      break;
    }
    if (!taken[idx]) {
      selected.push_back(idx);
      taken[idx] = true;
    }
  }
  return selected;
}

namespace
{
struct Lane
{
  std::size_t agent_slot{0};
  std::size_t mode{0};
  Pose2D frame;
  Point2D last_point;
  double last_heading{0.0};
  std::vector<Point2D> waypoints;
  std::vector<std::vector<Point2D>> stored_longs;
  double score{0.0};
  // Generated decoder inputs, for full recomputation.
  std::vector<Tensor> token_features;
  std::vector<DecoderRow> token_rows;
};

constexpr double kHeadingSpeed = 0.1;

std::vector<Point2D> to_global(const Pose2D & frame, std::span<const double> local_xy)
{
  std::vector<Point2D> out(local_xy.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = apply_pose(frame, Point2D{local_xy[2 * i], local_xy[2 * i + 1]});
  }
  return out;
}

/// States of a generated interval: backward-difference velocities, heading along motion.
AgentTrack interval_track(const Lane & lane, AgentType type, std::span<const Point2D> pts, double dt)
{
  AgentTrack t;
  t.type = type;
  Point2D prev = lane.last_point;
  double heading = lane.last_heading;
  for (const Point2D & p : pts) {
    AgentState s;
    s.x = p.x;
    s.y = p.y;
    s.vx = (p.x - prev.x) / dt;
    s.vy = (p.y - prev.y) / dt;
    if (std::hypot(s.vx, s.vy) > kHeadingSpeed) {
      heading = std::atan2(s.vy, s.vx);
    }
    s.heading = wrap_angle(heading);
    s.valid = true;
    t.states.push_back(s);
    prev = p;
  }
  return t;
}

std::vector<double> log_softmax_row(std::span<const double> logits)
{
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) {
    s += std::exp(l - mx);
  }
  const double lse = mx + std::log(s);
  std::vector<double> out;
  for (double l : logits) {
    out.push_back(l - lse);
  }
  return out;
}
}  // namespace

std::vector<AgentPrediction> rollout(
  const AmpModel & model, const SceneSample & scene, const InferenceConfig & config, RolloutStats * stats)
{
  NoGradGuard no_grad;
  const ModelConfig & c = model.config;
  if (scene.t_obs != c.t_obs) {
    throw ValidationError("t_obs", "scene observation length differs from the model configuration");
  }
  const std::size_t k_long = c.k_long;
  const int l_obs = c.l_obs();
  const ContextCache cache = build_context(model, scene);

  std::vector<std::size_t> focal;
  std::vector<IntervalRef> refs;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (scene.agents[i].is_focal) {
      focal.push_back(i);
      const std::vector<IntervalRef> r = model.tokenizer.agent_intervals(scene.agents[i], false);
      refs.insert(refs.end(), r.begin(), r.end());
    }
  }
  std::vector<AgentPrediction> out;
  if (focal.empty()) {
    return out;
  }
  const TokenBatch obs = model.tokenizer.encode_intervals(refs);
  std::vector<DecoderRow> obs_rows;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const TokenInfo & info = obs.info[i];
    obs_rows.push_back({i / static_cast<std::size_t>(l_obs), kSharedLane, info.temporal_index, info.frame, info.valid});
  }
  std::vector<std::size_t> last_rows;
  for (std::size_t a = 0; a < focal.size(); ++a) {
    const std::size_t r = a * static_cast<std::size_t>(l_obs) + static_cast<std::size_t>(l_obs - 1);
    if (!obs.info[r].valid) {
      throw ValidationError(
        "agents[" + std::to_string(focal[a]) + "].states", "focal agent's last observed step is missing");
    }
    last_rows.push_back(r);
  }

  DecoderHistory history;
  const Tensor obs_out = model.decoder.decode(obs.features, obs_rows, cache, config.use_cache ? &history : nullptr);
  if (stats) {
    stats->decoder_rows += obs_rows.size();
    ++stats->decode_calls;
  }

  std::vector<Lane> lanes;
  for (std::size_t a = 0; a < focal.size(); ++a) {
    const AgentState & last = scene.agents[focal[a]].states[static_cast<std::size_t>(c.t_obs - 1)];
    for (std::size_t k = 0; k < k_long; ++k) {
      Lane lane;
      lane.agent_slot = a;
      lane.mode = k;
      lane.frame = obs.info[last_rows[a]].frame;
      lane.last_point = {last.x, last.y};
      lane.last_heading = last.heading;
      lanes.push_back(std::move(lane));
    }
  }

  Tensor lane_feats = gather_rows(obs_out, last_rows);  // one row per agent at step 0
  for (int r = 0; r < c.l_future(); ++r) {
    const ModeOutputs modes = model.detokenizer.forward(lane_feats);
    std::vector<std::size_t> mode_rows;
    for (std::size_t li = 0; li < lanes.size(); ++li) {
      const std::size_t token = r == 0 ? lanes[li].agent_slot : li;
      mode_rows.push_back(token * k_long + lanes[li].mode);
    }
    const Tensor refined = gather_rows(modes.refined, mode_rows);
    const Tensor shorts = model.detokenizer.decode_short(refined);
    const Tensor longs = model.detokenizer.decode_long(refined);
    const std::size_t short_w = shorts.cols();
    const std::size_t long_w = longs.cols();
    std::vector<std::vector<Point2D>> emitted(lanes.size());
    for (std::size_t li = 0; li < lanes.size(); ++li) {
      Lane & lane = lanes[li];
      const std::size_t token = r == 0 ? lane.agent_slot : li;
      if (r == 0 || !config.score_first_step_only) {
        const std::span<const double> logits = modes.confidence.data().subspan(token * k_long, k_long);
        lane.score += log_softmax_row(logits)[lane.mode];
      }
      const std::vector<Point2D> long_global =
        to_global(lane.frame, longs.data().subspan(li * long_w, long_w));
      if (config.independent) {
        lane.waypoints = long_global;
        continue;
      }
      lane.stored_longs.push_back(long_global);
      const std::vector<Point2D> short_global =
        to_global(lane.frame, shorts.data().subspan(li * short_w, short_w));
      emitted[li] = fuse(short_global, lane.stored_longs, r, config.tau);
      lane.waypoints.insert(lane.waypoints.end(), emitted[li].begin(), emitted[li].end());
    }
    if (config.independent || r + 1 == c.l_future()) {
      break;
    }

    // Re-tokenize the emitted intervals as every lane's next input token.
    std::vector<AgentTrack> tracks;
    tracks.reserve(lanes.size());
    for (std::size_t li = 0; li < lanes.size(); ++li) {
      tracks.push_back(interval_track(
        lanes[li], scene.agents[focal[lanes[li].agent_slot]].type, emitted[li], scene.dt));
    }
    std::vector<IntervalRef> new_refs;
    for (const AgentTrack & t : tracks) {
      new_refs.push_back({&t, 0, TokenKind::kAgentFuture});
    }
    const TokenBatch next = model.tokenizer.encode_intervals(new_refs);
    std::vector<DecoderRow> rows;
    for (std::size_t li = 0; li < lanes.size(); ++li) {
      Lane & lane = lanes[li];
      const TokenInfo & info = next.info[li];
      const DecoderRow row{lane.agent_slot, static_cast<int>(lane.mode), l_obs + r, info.frame, true};
      rows.push_back(row);
      lane.frame = info.frame;
      lane.last_point = emitted[li].back();
      lane.last_heading = tracks[li].states.back().heading;
      const std::size_t idx[1] = {li};
      lane.token_features.push_back(gather_rows(next.features, idx));
      lane.token_rows.push_back(row);
    }
    if (config.use_cache) {
      lane_feats = model.decoder.decode(next.features, rows, cache, &history);
      if (stats) {
        stats->decoder_rows += rows.size();
        ++stats->decode_calls;
      }
    } else {
      std::vector<Tensor> lane_out;
      for (const Lane & lane : lanes) {
        std::vector<Tensor> parts{obs.features};
        parts.insert(parts.end(), lane.token_features.begin(), lane.token_features.end());
        std::vector<DecoderRow> all_rows = obs_rows;
        all_rows.insert(all_rows.end(), lane.token_rows.begin(), lane.token_rows.end());
        const Tensor y = model.decoder.decode(concat_rows(parts), all_rows, cache);
        const std::size_t last[1] = {all_rows.size() - 1};
        lane_out.push_back(gather_rows(y, last));
        if (stats) {
          stats->decoder_rows += all_rows.size();
          ++stats->decode_calls;
        }
      }
      lane_feats = concat_rows(lane_out);
    }
  }

  for (std::size_t a = 0; a < focal.size(); ++a) {
    AgentPrediction pred;
    pred.scene_id = scene.scene_id;
    pred.agent_id = scene.agents[focal[a]].id;
    std::vector<ModeTrajectory> cands;
    double mx = -std::numeric_limits<double>::infinity();
    for (const Lane & lane : lanes) {
      if (lane.agent_slot == a) {
        mx = std::max(mx, lane.score);
      }
    }
    double sum = 0.0;
    for (const Lane & lane : lanes) {
      if (lane.agent_slot == a) {
        cands.push_back({lane.waypoints, std::exp(lane.score - mx), lane.mode});
        sum += cands.back().score;
      }
    }
    for (ModeTrajectory & m : cands) {
      m.score /= sum;
    }
    const std::size_t keep = config.nms_out_count == 0 ? cands.size() : config.nms_out_count;
    double kept_sum = 0.0;
    for (std::size_t idx : nms_select(cands, config.nms_dist_threshold, keep)) {
      pred.modes.push_back(cands[idx]);
      kept_sum += cands[idx].score;
    }
    for (ModeTrajectory & m : pred.modes) {
      m.score /= kept_sum;
    }
    out.push_back(std::move(pred));
  }
  return out;
}

std::string prediction_to_json_line(const AgentPrediction & p)
{
  nlohmann::json j;
  j["format_version"] = kPredictionFormatVersion;
  j["scene_id"] = p.scene_id;
  j["agent_id"] = p.agent_id;
  nlohmann::json modes = nlohmann::json::array();
  for (const ModeTrajectory & m : p.modes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point2D & w : m.waypoints) {
      pts.push_back({w.x, w.y});
    }
    modes.push_back({{"mode", m.mode}, {"score", m.score}, {"waypoints", std::move(pts)}});
  }
  j["modes"] = std::move(modes);
  return j.dump();
}

AgentPrediction prediction_from_json_line(const std::string & text, std::size_t line)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error & e) {
    throw ParseError(e.what(), line);
  }
  AgentPrediction p;
  try {
    if (j.at("format_version").get<int>() != kPredictionFormatVersion) {
      throw ValidationError("format_version", "unsupported prediction format version");
    }
    p.scene_id = j.at("scene_id").get<std::string>();
    p.agent_id = j.at("agent_id").get<std::int64_t>();
    for (const auto & m : j.at("modes")) {
      ModeTrajectory mt;
      mt.mode = m.at("mode").get<std::size_t>();
      mt.score = m.at("score").get<double>();
      for (const auto & w : m.at("waypoints")) {
        mt.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
      }
      p.modes.push_back(std::move(mt));
    }
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(e.what(), line);
  }
  return p;
}

void save_predictions(const std::vector<AgentPrediction> & preds, const std::string & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  for (const AgentPrediction & p : preds) {
    out << prediction_to_json_line(p) << '\n';
  }
}

std::vector<AgentPrediction> load_predictions(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::vector<AgentPrediction> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      out.push_back(prediction_from_json_line(line, n));
    }
  }
  return out;
}

}  // namespace amp
