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

#include "amp/training.hpp"

#include "amp/errors.hpp"
#include "amp/random.hpp"

#include "json.hpp"

#include <cmath>
#include <numeric>

namespace amp
{

LossBreakdown SceneLoss::values() const
{
  return {reg_short.item(), cls_short.item(), reg_long.item(), cls_long.item(), reg_dense.item(), total.item()};
}

std::optional<TokenTargets> token_targets(
  const AgentTrack & track, const Pose2D & frame, int end_step, const ModelConfig & config,
  const AnchorSet & anchors)
{
  const int n = static_cast<int>(track.states.size());
  const int next_end = end_step + config.t_token;
  if (next_end >= n || !track.states[static_cast<std::size_t>(next_end)].valid) {
    return std::nullopt;
  }
  TokenTargets t;
  t.short_xy.assign(static_cast<std::size_t>(config.t_token) * 2, 0.0);
  t.short_mask.assign(t.short_xy.size(), 0.0);
  t.long_xy.assign(static_cast<std::size_t>(config.t_future) * 2, 0.0);
  t.long_mask.assign(t.long_xy.size(), 0.0);
  int last_valid = 0;
  Point2D last_point;
  for (int h = 1; h <= config.t_future; ++h) {
    const int s = end_step + h;
    if (s >= n || !track.states[static_cast<std::size_t>(s)].valid) {
      continue;
    }
    const AgentState & st = track.states[static_cast<std::size_t>(s)];
    const Point2D p = to_local(frame, Point2D{st.x, st.y});
    const std::size_t o = static_cast<std::size_t>(h - 1) * 2;
    t.long_xy[o] = p.x;
    t.long_xy[o + 1] = p.y;
    t.long_mask[o] = t.long_mask[o + 1] = 1.0;
    if (h <= config.t_token) {
      t.short_xy[o] = p.x;
      t.short_xy[o + 1] = p.y;
      t.short_mask[o] = t.short_mask[o + 1] = 1.0;
    }
    last_valid = h;
    last_point = p;
  }
  const std::size_t short_end = static_cast<std::size_t>(config.t_token - 1) * 2;
  t.short_winner = static_cast<int>(
    select_winner({t.short_xy[short_end], t.short_xy[short_end + 1]}, anchors.short_anchors));
  const std::vector<Point2D> & long_anchors = anchors.long_for(track.type);
  if (last_valid == config.t_future) {
    t.long_winner = select_winner(last_point, long_anchors);
  } else {
    const double f = static_cast<double>(last_valid) / config.t_future;
    std::vector<Point2D> scaled;
    for (const Point2D & a : long_anchors) {
      scaled.push_back({a.x * f, a.y * f});
    }
    t.long_winner = select_winner(last_point, scaled);
  }
  return t;
}

namespace
{
/// Appends per-coordinate weights normalized by the token's valid point count.
void append_normalized(
  std::vector<double> & targets, std::vector<double> & weights, const std::vector<double> & xy,
  const std::vector<double> & mask, double token_count)
{
  const double valid_points = std::accumulate(mask.begin(), mask.end(), 0.0) / 2.0;
  targets.insert(targets.end(), xy.begin(), xy.end());
  for (double m : mask) {
    weights.push_back(valid_points > 0.0 ? m / (valid_points * token_count) : 0.0);
  }
}
}  // namespace

SceneLoss compute_loss(
  const AmpModel & model, const SceneSample & scene, const ScenePass & pass, const TrainConfig & train)
{
  const ModelConfig & c = model.config;
  SceneLoss loss;
  std::vector<TokenTargets> targets;
  for (std::size_t r = 0; r < pass.rows.size(); ++r) {
    const DecoderRow & row = pass.rows[r];
    if (!row.valid || row.temporal > c.l_total() - 2) {
      continue;
    }
    const AgentTrack & track = scene.agents[pass.agents[row.agent]];
    std::optional<TokenTargets> t =
      token_targets(track, row.frame, (row.temporal + 1) * c.t_token - 1, c, model.anchors);
    if (t) {
      loss.token_rows.push_back(r);
      loss.long_winners.push_back(t->long_winner);
      loss.short_winners.push_back(t->short_winner);
      targets.push_back(std::move(*t));
    }
  }

  const Tensor zero = Tensor::scalar(0.0);
  loss.reg_short = loss.cls_short = loss.reg_long = loss.cls_long = zero;
  const std::size_t n = targets.size();
  if (n > 0) {
    const ModeOutputs modes = model.detokenizer.forward(gather_rows(pass.decoded, loss.token_rows));
    loss.refined = modes.refined;
    std::vector<std::size_t> winner_rows;
    std::vector<double> st, sw, lt, lw;
    for (std::size_t i = 0; i < n; ++i) {
      winner_rows.push_back(i * c.k_long + loss.long_winners[i]);
      append_normalized(st, sw, targets[i].short_xy, targets[i].short_mask, static_cast<double>(n));
      append_normalized(lt, lw, targets[i].long_xy, targets[i].long_mask, static_cast<double>(n));
    }
    const Tensor winners = gather_rows(modes.refined, winner_rows);
    loss.reg_short = smooth_l1(model.detokenizer.decode_short(winners), st, sw);
    loss.reg_long = smooth_l1(model.detokenizer.decode_long(winners), lt, lw);
    if (modes.short_logits.defined()) {
      loss.cls_short = cross_entropy(gather_rows(modes.short_logits, winner_rows), loss.short_winners);
    }
    std::vector<int> long_labels(loss.long_winners.begin(), loss.long_winners.end());
    loss.cls_long = cross_entropy(modes.confidence, long_labels);
  }

  loss.reg_dense = zero;
  const std::size_t nd = pass.cache.nonfocal_info.size();
  if (nd > 0) {
    std::vector<TokenTargets> dense;
    std::size_t supervised = 0;
    for (const TokenInfo & info : pass.cache.nonfocal_info) {
      const AgentTrack & track = scene.agents[find_agent(scene, info.owner)];
      const int end = (info.temporal_index + 1) * c.t_token - 1;
      TokenTargets t;
      t.long_xy.assign(static_cast<std::size_t>(c.t_future) * 2, 0.0);
      t.long_mask.assign(t.long_xy.size(), 0.0);
      for (int h = 1; h <= c.t_future; ++h) {
        const std::size_t s = static_cast<std::size_t>(end + h);
        if (s >= track.states.size() || !track.states[s].valid) {
          continue;
        }
        const Point2D p = to_local(info.frame, Point2D{track.states[s].x, track.states[s].y});
        const std::size_t o = static_cast<std::size_t>(h - 1) * 2;
        t.long_xy[o] = p.x;
        t.long_xy[o + 1] = p.y;
        t.long_mask[o] = t.long_mask[o + 1] = 1.0;
      }
      if (std::accumulate(t.long_mask.begin(), t.long_mask.end(), 0.0) > 0.0) {
        ++supervised;
      }
      dense.push_back(std::move(t));
    }
    if (supervised > 0) {
      std::vector<double> dt, dw;
      for (const TokenTargets & t : dense) {
        append_normalized(dt, dw, t.long_xy, t.long_mask, static_cast<double>(supervised));
      }
      loss.reg_dense = smooth_l1(pass.cache.dense_traj, dt, dw);
    }
  }

  const Tensor terms[5] = {
    scale(loss.reg_short, train.w_reg_short), scale(loss.cls_short, train.w_cls_short),
    scale(loss.reg_long, train.w_reg_long), scale(loss.cls_long, train.w_cls_long),
    scale(loss.reg_dense, train.w_reg_dense)};
  Tensor total = terms[0];
  for (std::size_t i = 1; i < 5; ++i) {
    total = add(total, terms[i]);
  }
  loss.total = total;
  return loss;
}

AdamW::AdamW(const ParamStore & params, const TrainConfig & config) : config_(config)
{
  for (const auto & [name, t] : params.items()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void AdamW::step(ParamStore & params, double lr)
{
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  std::size_t idx = 0;
  for (const auto & item : params.items()) {
    Tensor t = item.second;
    std::span<double> p = t.mutable_data();
    const std::span<const double> g = t.grad();
    std::vector<double> & m = m_[idx];
    std::vector<double> & v = v_[idx];
    ++idx;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_eps);
      p[i] -= lr * (update + config_.weight_decay * p[i]);
    }
  }
}

double clip_grad_norm(ParamStore & params, double max_norm)
{
  double sq = 0.0;
  for (const auto & [name, t] : params.items()) {
    for (double g : t.grad()) {
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto & item : params.items()) {
      Tensor t = item.second;
      for (double & g : t.mutable_grad()) {
        g *= s;
      }
    }
  }
  return norm;
}

double learning_rate(const TrainConfig & config, int epoch)
{
  double lr = config.lr;
  for (int e : config.decay_epochs) {
    if (epoch >= e) {
      lr *= 0.5;
    }
  }
  return lr;
}

namespace
{
void check_finite_params(const ParamStore & params, bool grads)
{
  for (const auto & [name, t] : params.items()) {
    const std::span<const double> d = grads ? t.grad() : t.data();
    for (double x : d) {
      if (!std::isfinite(x)) {
        throw NumericError(std::string(grads ? "non-finite gradient of parameter '" : "non-finite parameter '") + name + "'");
      }
    }
  }
}

void check_finite_loss(const ParamStore & params, const SceneLoss & loss, const std::string & scene_id)
{
  if (std::isfinite(loss.total.item())) {
    return;
  }
  check_finite_params(params, false);
  const std::pair<const char *, const Tensor *> terms[] = {
    {"reg_short", &loss.reg_short}, {"cls_short", &loss.cls_short}, {"reg_long", &loss.reg_long},
    {"cls_long", &loss.cls_long}, {"reg_dense", &loss.reg_dense}};
  for (const auto & [name, t] : terms) {
    if (!std::isfinite(t->item())) {
      throw NumericError(std::string("non-finite loss term '") + name + "' in scene " + scene_id);
    }
  }
  throw NumericError("non-finite total loss in scene " + scene_id);
}

void accumulate(LossBreakdown & acc, const LossBreakdown & x, double w)
{
  acc.reg_short += w * x.reg_short;
  acc.cls_short += w * x.cls_short;
  acc.reg_long += w * x.reg_long;
  acc.cls_long += w * x.cls_long;
  acc.reg_dense += w * x.reg_dense;
  acc.total += w * x.total;
}

nlohmann::json to_json(const LossBreakdown & b)
{
  return {
    {"reg_short", b.reg_short}, {"cls_short", b.cls_short}, {"reg_long", b.reg_long},
    {"cls_long", b.cls_long},   {"reg_dense", b.reg_dense}, {"total", b.total}};
}
}  // namespace

TrainResult train(
  AmpModel & model, const std::vector<SceneSample> & scenes, const TrainConfig & config, std::ostream * log)
{
  config.validate();
  if (model.anchors.short_anchors.empty() || model.anchors.long_anchors.empty()) {
    throw UsageError("train: anchors must be fitted before training");
  }
  TrainResult result;
  if (scenes.empty()) {
    return result;
  }
  AdamW opt(model.params, config);
  Rng order_rng(config.seed + 0x5EED);
  Rng dropout_rng(config.seed + 0xD0D0);
  std::size_t step = 0;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    const bool use_dropout =
      model.config.dropout > 0.0 && epoch <= config.epochs - config.dropout_off_last_epochs;
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.index(i)]);
    }
    LossBreakdown epoch_acc;
    std::size_t epoch_steps = 0;
    bool done = false;
    for (std::size_t start = 0; start < order.size() && !done; start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double w = 1.0 / static_cast<double>(end - start);
      model.params.zero_grad();
      StepRecord rec;
      rec.step = step + 1;
      rec.epoch = epoch;
      rec.lr = lr;
      for (std::size_t b = start; b < end; ++b) {
        const SceneSample & scene = scenes[order[b]];
        const std::vector<std::int64_t> ids = select_training_agents(
          scene, config.max_extra_nonfocal, config.seed * 1000003ULL + step * 1009ULL + order[b]);
        const ScenePass pass = teacher_forced_pass(model, scene, ids, use_dropout ? &dropout_rng : nullptr);
        const SceneLoss loss = compute_loss(model, scene, pass, config);
        check_finite_loss(model.params, loss, scene.scene_id);
        backward(scale(loss.total, w));
        accumulate(rec.loss, loss.values(), w);
      }
      check_finite_params(model.params, false);
      check_finite_params(model.params, true);
      rec.grad_norm = clip_grad_norm(model.params, config.grad_clip);
      opt.step(model.params, lr);
      ++step;
      ++epoch_steps;
      accumulate(epoch_acc, rec.loss, 1.0);
      result.steps.push_back(rec);
      done = config.max_steps > 0 && step >= config.max_steps;
    }
    LossBreakdown mean_epoch;
    accumulate(mean_epoch, epoch_acc, 1.0 / static_cast<double>(std::max<std::size_t>(1, epoch_steps)));
    result.epochs.push_back(mean_epoch);
    if (log) {
      nlohmann::json line = to_json(mean_epoch);
      line["epoch"] = epoch;
      line["steps"] = step;
      line["lr"] = lr;
      *log << line.dump() << '\n';
    }
    if (done) {
      break;
    }
  }
  return result;
}

}  // namespace amp
