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

#include "amp/errors.hpp"
#include "amp/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace amp
{
namespace
{

struct RandomAgent
{
  std::vector<ModeTrajectory> modes;
  GroundTruth gt;
};

RandomAgent random_agent(Rng & rng, std::size_t steps, std::size_t k)
{
  RandomAgent a;
  for (std::size_t s = 0; s < steps; ++s) {
    a.gt.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    a.gt.valid.push_back(rng.uniform(0, 1) > 0.2);
  }
  for (std::size_t m = 0; m < k; ++m) {
    ModeTrajectory t;
    for (std::size_t s = 0; s < steps; ++s) {
      t.waypoints.push_back({a.gt.points[s].x + rng.normal(0, 2), a.gt.points[s].y + rng.normal(0, 2)});
    }
    t.score = rng.uniform(0, 1);
    t.mode = m;
    a.modes.push_back(t);
  }
  return a;
}

TEST(Metrics, HandCase)
{
  const std::vector<ModeTrajectory> modes{{{{0, 0}, {1, 0}}, 1.0, 0}};
  const GroundTruth gt{{{0, 0}, {1, 1}}, {true, true}};
  EXPECT_DOUBLE_EQ(*min_ade(modes, gt), 0.5);
  EXPECT_DOUBLE_EQ(*min_fde(modes, gt), 1.0);
  EXPECT_FALSE(*is_miss(modes, gt, 1.0));
  EXPECT_TRUE(*is_miss(modes, gt, 0.5));
  EXPECT_FALSE(*is_miss(modes, gt, std::numeric_limits<double>::infinity()));
  const GroundTruth hidden{{{0, 0}, {1, 1}}, {false, false}};
  EXPECT_FALSE(min_ade(modes, hidden).has_value());
  EXPECT_FALSE(min_fde(modes, hidden).has_value());
  EXPECT_THROW(min_ade({}, gt), UsageError);
}

TEST(Metrics, MatchBruteForceOnRandomSets)
{
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t steps = 1 + rng.index(12);
    const std::size_t stride = 1 + rng.index(3);
    const RandomAgent a = random_agent(rng, steps, 1 + rng.index(6));
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    bool any_step = false;
    for (const ModeTrajectory & m : a.modes) {
      double s = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < steps; ++i) {
        if ((i + 1) % stride == 0 && a.gt.valid[i]) {
          s += std::sqrt(std::pow(m.waypoints[i].x - a.gt.points[i].x, 2) + std::pow(m.waypoints[i].y - a.gt.points[i].y, 2));
          ++n;
        }
      }
      if (n > 0) {
        any_step = true;
        best_ade = std::min(best_ade, s / n);
      }
      const Point2D & e = m.waypoints.back();
      best_fde = std::min(best_fde, std::sqrt(std::pow(e.x - a.gt.points.back().x, 2) + std::pow(e.y - a.gt.points.back().y, 2)));
    }
    const auto ade = min_ade(a.modes, a.gt, stride);
    ASSERT_EQ(ade.has_value(), any_step);
    if (any_step) {
      EXPECT_NEAR(*ade, best_ade, 1e-9);
    }
    const auto fde = min_fde(a.modes, a.gt);
    ASSERT_EQ(fde.has_value(), static_cast<bool>(a.gt.valid.back()));
    if (fde) {
      EXPECT_NEAR(*fde, best_fde, 1e-9);
      EXPECT_EQ(*is_miss(a.modes, a.gt, 2.0), best_fde > 2.0);
      // Witness: minFDE equals some mode's final error.
      bool witness = false;
      for (const ModeTrajectory & m : a.modes) {
        witness = witness || std::hypot(m.waypoints.back().x - a.gt.points.back().x,
                                        m.waypoints.back().y - a.gt.points.back().y) == *fde;
      }
      EXPECT_TRUE(witness);
    }
  }
}

TEST(Metrics, AveragePrecisionMatchesBruteForce)
{
  Rng rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t agents = 1 + rng.index(8);
    std::vector<ScoredDetection> dets;
    for (std::size_t a = 0; a < agents; ++a) {
      const std::size_t k = 1 + rng.index(4);
      for (std::size_t m = 0; m < k; ++m) {
        dets.push_back({a, std::round(rng.uniform(0, 5)) / 5.0, rng.uniform(0, 1) < 0.4});
      }
    }
    EXPECT_NEAR(average_precision(dets, agents), test::brute_ap(dets, agents), 1e-9) << trial;
  }
}

TEST(Metrics, AveragePrecisionHandCurve)
{
  // Ranked: A hit (TP), A hit (duplicate), B miss, C hit (TP); 3 positives.
  // Precision 1, 1/2, 1/3, 1/2 at recall 1/3, 1/3, 1/3, 2/3 -> area 1/3 + 1/6.
  const std::vector<ScoredDetection> dets{{0, 0.9, true}, {0, 0.8, true}, {1, 0.7, false}, {2, 0.6, true}};
  EXPECT_NEAR(average_precision(dets, 3), 0.5, 1e-15);
  EXPECT_THROW(average_precision(dets, 0), UsageError);
}

std::vector<AgentEval> random_evals(Rng & rng, std::size_t n)
{
  std::vector<AgentEval> out;
  for (std::size_t i = 0; i < n; ++i) {
    RandomAgent a = random_agent(rng, 6, 4);
    a.gt.valid.back() = true;
    out.push_back({a.modes, a.gt, static_cast<AgentType>(i % kNumAgentTypes)});
  }
  return out;
}

TEST(Metrics, MapLimitsAndMonotoneScores)
{
  Rng rng(103);
  EvalConfig cfg;
  std::vector<AgentEval> evals = random_evals(rng, 10);
  for (AgentEval & e : evals) {
    e.modes[0].waypoints = e.gt.points;
    e.modes[0].score = 2.0;
  }
  EXPECT_DOUBLE_EQ(*simplified_map(evals, cfg), 1.0);
  for (AgentEval & e : evals) {
    for (ModeTrajectory & m : e.modes) {
      for (Point2D & p : m.waypoints) {
        p.x += 100.0;
      }
    }
  }
  EXPECT_DOUBLE_EQ(*simplified_map(evals, cfg), 0.0);
  EXPECT_FALSE(simplified_map({}, cfg).has_value());

  std::vector<AgentEval> mixed = random_evals(rng, 12);
  const double base = *simplified_map(mixed, cfg);
  for (AgentEval & e : mixed) {
    for (ModeTrajectory & m : e.modes) {
      m.score = std::exp(3.0 * m.score) - 7.0;
    }
  }
  EXPECT_DOUBLE_EQ(*simplified_map(mixed, cfg), base);
}

TEST(Metrics, InvariantUnderJointRigidMotion)
{
  Rng rng(104);
  const Pose2D m = Pose2D::make(12, -30, 0.8);
  std::vector<AgentEval> evals = random_evals(rng, 8);
  std::vector<AgentEval> moved = evals;
  for (AgentEval & e : moved) {
    for (Point2D & p : e.gt.points) {
      p = apply_pose(m, p);
    }
    for (ModeTrajectory & t : e.modes) {
      for (Point2D & p : t.waypoints) {
        p = apply_pose(m, p);
      }
    }
  }
  EvalConfig cfg;
  EXPECT_NEAR(*simplified_map(evals, cfg), *simplified_map(moved, cfg), 1e-12);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    EXPECT_NEAR(*min_ade(evals[i].modes, evals[i].gt), *min_ade(moved[i].modes, moved[i].gt), 1e-9);
    EXPECT_NEAR(*min_fde(evals[i].modes, evals[i].gt), *min_fde(moved[i].modes, moved[i].gt), 1e-9);
  }
}

TEST(Metrics, EvaluateAggregatesAndErrors)
{
  const ModelConfig c = test::tiny_model_config();
  const auto scenes = test::mixed_scenes(2, 7, test::gen_config(c));
  EXPECT_THROW(evaluate({}, scenes, {}), UsageError);

  std::vector<AgentPrediction> preds;
  for (const SceneSample & s : scenes) {
    for (const AgentTrack & t : s.agents) {
      if (!t.is_focal) {
        continue;
      }
      const GroundTruth gt = future_ground_truth(s, t);
      AgentPrediction p{s.scene_id, t.id, {{gt.points, 1.0, 0}}};
      preds.push_back(p);
    }
  }
  EvalConfig cfg;
  cfg.measure_horizons = {0, static_cast<std::size_t>(c.t_future - 1)};
  const EvalReport r = evaluate(preds, scenes, cfg);
  EXPECT_EQ(r.agents, preds.size());
  EXPECT_DOUBLE_EQ(*r.min_ade, 0.0);
  EXPECT_DOUBLE_EQ(*r.miss_rate, 0.0);
  EXPECT_DOUBLE_EQ(*r.map, 1.0);
  EXPECT_EQ(r.horizon_min_fde.size(), 2u);
  EXPECT_EQ(r.scenes.size(), 2u);

  auto bad = preds;
  bad[0].scene_id = "nope";
  EXPECT_THROW(evaluate(bad, scenes, cfg), ValidationError);
  cfg.measure_horizons = {static_cast<std::size_t>(c.t_future)};
  EXPECT_THROW(evaluate(preds, scenes, cfg), ConfigError);
}

}  // namespace
}  // namespace amp
