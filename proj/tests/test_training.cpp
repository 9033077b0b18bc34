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
#include "amp/model.hpp"
#include "amp/training.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace amp
{
namespace
{

struct TrainFixture
{
  ModelConfig config = test::tiny_model_config();
  std::vector<SceneSample> scenes = test::mixed_scenes(4, 100, test::gen_config(config));
  AmpModel model;

  TrainFixture() : model(AmpModel::create(config, 3)) { model.anchors = fit_anchors(scenes, config, 0); }

  std::vector<std::int64_t> focal_ids(const SceneSample & s) const { return select_training_agents(s, 0, 0); }
};

double huber(double r)
{
  const double a = std::abs(r);
  return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

double log_softmax_at(const std::vector<double> & logits, std::size_t label)
{
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    mx = std::max(mx, v);
  }
  double z = 0.0;
  for (double v : logits) {
    z += std::exp(v - mx);
  }
  return logits[label] - mx - std::log(z);
}

std::size_t nearest(const Point2D & p, const std::vector<Point2D> & anchors)
{
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double d = std::hypot(p.x - anchors[k].x, p.y - anchors[k].y);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

/// Straight-line recomputation of every loss term from the pass outputs.
LossBreakdown oracle_loss(const AmpModel & model, const SceneSample & scene, const ScenePass & pass)
{
  NoGradGuard no_grad;
  const ModelConfig & c = model.config;
  const std::size_t K = c.k_long;
  const Detokenizer & d = model.detokenizer;
  struct Sup
  {
    std::size_t row;
    std::vector<double> sxy, sm, lxy, lm;
    std::size_t lw;
    std::size_t sw;
  };
  std::vector<Sup> sups;
  for (std::size_t r = 0; r < pass.rows.size(); ++r) {
    const DecoderRow & row = pass.rows[r];
    if (!row.valid || row.temporal + 2 > c.l_total()) {
      continue;
    }
    const AgentTrack & tr = scene.agents[pass.agents[row.agent]];
    const int end = (row.temporal + 1) * c.t_token - 1;
    if (end + c.t_token >= static_cast<int>(tr.states.size()) || !tr.states[end + c.t_token].valid) {
      continue;
    }
    Sup s{r, std::vector<double>(2 * c.t_token), std::vector<double>(2 * c.t_token),
          std::vector<double>(2 * c.t_future), std::vector<double>(2 * c.t_future), 0, 0};
    int last = 0;
    Point2D last_p;
    for (int h = 1; h <= c.t_future; ++h) {
      const int st = end + h;
      if (st >= static_cast<int>(tr.states.size()) || !tr.states[st].valid) {
        continue;
      }
      // Local coordinates by explicit rotation.
      const double dx = tr.states[st].x - row.frame.x;
      const double dy = tr.states[st].y - row.frame.y;
      const double cs = std::cos(row.frame.theta), sn = std::sin(row.frame.theta);
      const Point2D p{cs * dx + sn * dy, -sn * dx + cs * dy};
      s.lxy[2 * (h - 1)] = p.x;
      s.lxy[2 * (h - 1) + 1] = p.y;
      s.lm[2 * (h - 1)] = s.lm[2 * (h - 1) + 1] = 1;
      if (h <= c.t_token) {
        s.sxy[2 * (h - 1)] = p.x;
        s.sxy[2 * (h - 1) + 1] = p.y;
        s.sm[2 * (h - 1)] = s.sm[2 * (h - 1) + 1] = 1;
      }
      last = h;
      last_p = p;
    }
    s.sw = nearest({s.sxy[2 * c.t_token - 2], s.sxy[2 * c.t_token - 1]}, model.anchors.short_anchors);
    std::vector<Point2D> la = model.anchors.long_for(tr.type);
    for (auto & a : la) {
      a = {a.x * last / c.t_future, a.y * last / c.t_future};
    }
    s.lw = nearest(last_p, la);
    sups.push_back(std::move(s));
  }
  LossBreakdown out;
  const double n = static_cast<double>(sups.size());
  for (const Sup & s : sups) {
    const std::vector<std::size_t> one{s.row};
    const ModeOutputs m = d.forward(gather_rows(pass.decoded, one));
    const std::vector<std::size_t> wr{s.lw};
    const Tensor win = gather_rows(m.refined, wr);
    const Tensor so = d.decode_short(win);
    const Tensor lo = d.decode_long(win);
    auto reg = [&](const Tensor & pred, const std::vector<double> & xy, const std::vector<double> & mask) {
      double total = 0.0, pts = 0.0;
      for (std::size_t i = 0; i < xy.size(); ++i) {
        total += mask[i] * huber(pred.at(i) - xy[i]);
        pts += mask[i];
      }
      return pts > 0 ? total / (pts / 2.0) / n : 0.0;
    };
    out.reg_short += reg(so, s.sxy, s.sm);
    out.reg_long += reg(lo, s.lxy, s.lm);
    std::vector<double> sl(c.k_short), cl(K);
    for (std::size_t k = 0; k < c.k_short; ++k) {
      sl[k] = m.short_logits.at(s.lw, k);
    }
    for (std::size_t k = 0; k < K; ++k) {
      cl[k] = m.confidence.at(0, k);
    }
    out.cls_short -= log_softmax_at(sl, s.sw) / n;
    out.cls_long -= log_softmax_at(cl, s.lw) / n;
  }
  // Dense term.
  std::size_t supervised = 0;
  double dense = 0.0;
  for (std::size_t i = 0; i < pass.cache.nonfocal_info.size(); ++i) {
    const TokenInfo & info = pass.cache.nonfocal_info[i];
    const AgentTrack & tr = scene.agents[find_agent(scene, info.owner)];
    const int end = (info.temporal_index + 1) * c.t_token - 1;
    double total = 0.0, pts = 0.0;
    for (int h = 1; h <= c.t_future; ++h) {
      const std::size_t st = static_cast<std::size_t>(end + h);
      if (st >= tr.states.size() || !tr.states[st].valid) {
        continue;
      }
      const Point2D p = to_local(info.frame, Point2D{tr.states[st].x, tr.states[st].y});
      total += huber(pass.cache.dense_traj.at(i, 2 * (h - 1)) - p.x);
      total += huber(pass.cache.dense_traj.at(i, 2 * (h - 1) + 1) - p.y);
      pts += 1.0;
    }
    if (pts > 0) {
      ++supervised;
      dense += total / pts;
    }
  }
  out.reg_dense = supervised ? dense / static_cast<double>(supervised) : 0.0;
  out.total = out.reg_short + out.cls_short + out.reg_long + out.cls_long + out.reg_dense;
  return out;
}

TEST(Loss, MatchesStandaloneRecomputation)
{
  TrainFixture fx;
  for (const SceneSample & s : fx.scenes) {
    const auto ids = select_training_agents(s, 16, 1);
    const ScenePass pass = teacher_forced_pass(fx.model, s, ids);
    const LossBreakdown got = compute_loss(fx.model, s, pass, TrainConfig{}).values();
    const LossBreakdown want = oracle_loss(fx.model, s, pass);
    EXPECT_NEAR(got.reg_short, want.reg_short, 1e-9);
    EXPECT_NEAR(got.reg_long, want.reg_long, 1e-9);
    EXPECT_NEAR(got.cls_short, want.cls_short, 1e-9);
    EXPECT_NEAR(got.cls_long, want.cls_long, 1e-9);
    EXPECT_NEAR(got.reg_dense, want.reg_dense, 1e-9);
    EXPECT_NEAR(got.total, want.total, 1e-9);
    for (double v : {got.reg_short, got.reg_long, got.cls_short, got.cls_long, got.reg_dense}) {
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Loss, UniformLogitsGiveLogK)
{
  TrainFixture fx;
  for (const auto & [name, t] : fx.model.params.items()) {
    if (name.rfind("detok.conf", 0) == 0 || name.rfind("detok.cls_short", 0) == 0) {
      Tensor copy = t;
      auto d = copy.mutable_data();
      std::fill(d.begin(), d.end(), 0.0);
    }
  }
  const SceneSample & s = fx.scenes[0];
  const ScenePass pass = teacher_forced_pass(fx.model, s, fx.focal_ids(s));
  const LossBreakdown v = compute_loss(fx.model, s, pass, TrainConfig{}).values();
  EXPECT_NEAR(v.cls_long, std::log(static_cast<double>(fx.config.k_long)), 1e-12);
  EXPECT_NEAR(v.cls_short, std::log(static_cast<double>(fx.config.k_short)), 1e-12);
}

TEST(Loss, RegressionGradientsVanishOnNonWinnerModes)
{
  TrainFixture fx;
  for (const SceneSample & s : fx.scenes) {
    const ScenePass pass = teacher_forced_pass(fx.model, s, fx.focal_ids(s));
    const SceneLoss loss = compute_loss(fx.model, s, pass, TrainConfig{});
    ASSERT_FALSE(loss.token_rows.empty());
    backward(add(loss.reg_short, loss.reg_long));
    const auto g = loss.refined.grad();
    ASSERT_EQ(g.size(), loss.refined.numel());
    const std::size_t h = fx.config.hidden;
    bool winner_nonzero = false;
    for (std::size_t i = 0; i < loss.token_rows.size(); ++i) {
      for (std::size_t k = 0; k < fx.config.k_long; ++k) {
        const std::size_t row = i * fx.config.k_long + k;
        for (std::size_t c = 0; c < h; ++c) {
          if (k == loss.long_winners[i]) {
            winner_nonzero |= g[row * h + c] != 0.0;
          } else {
            ASSERT_EQ(g[row * h + c], 0.0) << "token " << i << " mode " << k;
          }
        }
      }
    }
    EXPECT_TRUE(winner_nonzero);
  }
}

TEST(Loss, TruncatedHorizonMatchesScaledAnchors)
{
  ModelConfig c = test::tiny_model_config();
  AnchorSet anchors;
  anchors.long_anchors = {{{20, 0}, {10, 10}, {0, -20}}};
  anchors.short_anchors = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  AgentTrack tr;
  tr.states.resize(c.t_obs + c.t_future);
  // Moves along +y at 1 m per step from step 0; data ends 10 steps after the token end.
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    tr.states[t] = {0.0, static_cast<double>(t), 0.0, 5.0, M_PI / 2, t <= 19};
  }
  const int end_step = 9;
  const Pose2D frame = Pose2D::make(0, 9, 0);
  const auto tt = token_targets(tr, frame, end_step, c, anchors);
  ASSERT_TRUE(tt.has_value());
  // Endpoint (0, 10) at h = 10 of 20; scaled anchors (10,0), (5,5), (0,-10): nearest is (5,5).
  EXPECT_EQ(tt->long_winner, 1u);
  EXPECT_EQ(tt->short_winner, 1);
  EXPECT_EQ(tt->long_mask[2 * 9], 1.0);
  EXPECT_EQ(tt->long_mask[2 * 10], 0.0);
  tr.states[end_step + c.t_token].valid = false;
  EXPECT_FALSE(token_targets(tr, frame, end_step, c, anchors).has_value());
}

TEST(Loss, LaterGroundTruthDoesNotChangeEarlierPredictions)
{
  TrainFixture fx;
  Rng rng(81);
  for (const SceneSample & s : fx.scenes) {
    const auto ids = fx.focal_ids(s);
    const ScenePass base = teacher_forced_pass(fx.model, s, ids);
    for (int t = 0; t + 1 < fx.config.l_total(); ++t) {
      SceneSample p = s;
      for (std::int64_t id : ids) {
        auto & tr = p.agents[find_agent(p, id)];
        for (std::size_t st = static_cast<std::size_t>((t + 1) * fx.config.t_token); st < tr.states.size(); ++st) {
          tr.states[st].x += rng.normal();
          tr.states[st].y += rng.normal();
        }
      }
      const ScenePass pert = teacher_forced_pass(fx.model, p, ids);
      for (std::size_t r = 0; r < base.rows.size(); ++r) {
        if (base.rows[r].temporal <= t) {
          for (std::size_t c = 0; c < fx.config.hidden; ++c) {
            ASSERT_EQ(base.decoded.at(r, c), pert.decoded.at(r, c));
          }
        }
      }
    }
  }
}

TEST(Loss, DecodedNonFocalAgentsLeaveTheContext)
{
  TrainFixture fx;
  Rng rng(82);
  std::size_t extras = 0;
  for (const SceneSample & s : fx.scenes) {
    std::vector<std::int64_t> ids;
    for (const AgentTrack & t : s.agents) {
      ids.push_back(t.id);
      extras += t.is_focal ? 0 : 1;
    }
    const ScenePass base = teacher_forced_pass(fx.model, s, ids);
    EXPECT_TRUE(base.cache.nonfocal_info.empty());
    SceneSample p = s;
    for (AgentTrack & tr : p.agents) {
      for (std::size_t st = static_cast<std::size_t>(fx.config.t_token); st < tr.states.size(); ++st) {
        tr.states[st].x += rng.normal();
      }
    }
    const ScenePass pert = teacher_forced_pass(fx.model, p, ids);
    for (std::size_t r = 0; r < base.rows.size(); ++r) {
      if (base.rows[r].temporal == 0) {
        for (std::size_t c = 0; c < fx.config.hidden; ++c) {
          ASSERT_EQ(base.decoded.at(r, c), pert.decoded.at(r, c));
        }
      }
    }
  }
  EXPECT_GT(extras, 0u);
}

TEST(Optim, LearningRateSchedule)
{
  TrainConfig c;
  c.lr = 1.0;
  c.decay_epochs = {3, 5};
  EXPECT_EQ(learning_rate(c, 1), 1.0);
  EXPECT_EQ(learning_rate(c, 2), 1.0);
  EXPECT_EQ(learning_rate(c, 3), 0.5);
  EXPECT_EQ(learning_rate(c, 5), 0.25);
  EXPECT_EQ(learning_rate(c, 9), 0.25);
}

TEST(Optim, ClipScalesGradientsByRatio)
{
  Rng rng(82);
  ParamStore a, b;
  a.add_matrix("w", 3, 4, rng);
  Rng rng2(82);
  b.add_matrix("w", 3, 4, rng2);
  std::vector<double> g(12);
  double sq = 0.0;
  for (auto & v : g) {
    v = rng.normal(0, 3.0);
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  ASSERT_GT(norm, 1.0);
  Tensor ta = a.get("w"), tb = b.get("w");
  ta.zero_grad();
  tb.zero_grad();
  std::copy(g.begin(), g.end(), ta.mutable_grad().begin());
  for (std::size_t i = 0; i < 12; ++i) {
    tb.mutable_grad()[i] = g[i] * (1.0 / norm);
  }
  EXPECT_NEAR(clip_grad_norm(a, 1.0), norm, 1e-12);
  TrainConfig tc;
  AdamW oa(a, tc), ob(b, tc);
  oa.step(a, 0.1);
  ob.step(b, 0.1);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(ta.at(i), tb.at(i), 1e-15);
  }
}

TEST(Train, ZeroLearningRateKeepsParametersBitIdentical)
{
  TrainFixture fx;
  std::vector<std::vector<double>> before;
  for (const auto & [name, t] : fx.model.params.items()) {
    before.emplace_back(t.data().begin(), t.data().end());
  }
  TrainConfig tc;
  tc.lr = 0.0;
  tc.max_steps = 3;
  tc.batch_size = 2;
  train(fx.model, fx.scenes, tc);
  std::size_t i = 0;
  for (const auto & [name, t] : fx.model.params.items()) {
    ASSERT_EQ(std::vector<double>(t.data().begin(), t.data().end()), before[i++]) << name;
  }
}

TEST(Train, DeterministicAndLogsPerEpoch)
{
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = 2;
  tc.batch_size = 2;
  TrainFixture a, b;
  std::ostringstream la, lb;
  train(a.model, a.scenes, tc, &la);
  train(b.model, b.scenes, tc, &lb);
  EXPECT_EQ(la.str(), lb.str());
  for (std::size_t i = 0; i < a.model.params.size(); ++i) {
    const auto & ta = a.model.params.items()[i].second;
    const auto & tb = b.model.params.items()[i].second;
    ASSERT_EQ(std::vector<double>(ta.data().begin(), ta.data().end()), std::vector<double>(tb.data().begin(), tb.data().end()));
  }
  std::istringstream lines(la.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find("\"reg_dense\""), std::string::npos);
    ++count;
  }
  EXPECT_EQ(count, 2);
}

TEST(Train, NonFiniteParameterIsNamed)
{
  TrainFixture fx;
  Tensor w = fx.model.params.get("detok.conf.0.w");
  w.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.max_steps = 1;
  try {
    train(fx.model, fx.scenes, tc);
    FAIL() << "expected NumericError";
  } catch (const NumericError & e) {
    EXPECT_NE(std::string(e.what()).find("detok.conf"), std::string::npos) << e.what();
  }
}

TEST(Train, RequiresAnchors)
{
  ModelConfig c = test::tiny_model_config();
  AmpModel m = AmpModel::create(c, 1);
  EXPECT_THROW(train(m, test::mixed_scenes(1, 0, test::gen_config(c)), TrainConfig{}), UsageError);
}

}  // namespace
}  // namespace amp
