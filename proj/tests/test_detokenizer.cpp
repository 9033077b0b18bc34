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
#include "amp/detokenizer.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

namespace amp
{
namespace
{

struct DetokFixture
{
  ModelConfig config = test::tiny_model_config();
  ParamStore store;
  Rng rng{71};
  Detokenizer detok;

  DetokFixture() { detok = Detokenizer::create(store, config, rng); }

  void zero(const std::string & prefix)
  {
    for (const auto & [name, t] : store.items()) {
      if (name.rfind(prefix, 0) == 0) {
        Tensor copy = t;
        auto d = copy.mutable_data();
        std::fill(d.begin(), d.end(), 0.0);
      }
    }
  }
};

TEST(Detokenizer, ExpandModesOrderAndCount)
{
  DetokFixture fx;
  Rng rng(72);
  auto tok = test::random_tensor({2, fx.config.hidden}, rng, 1.0, false);
  const Tensor m = fx.detok.expand_modes(tok);
  const std::size_t h = fx.config.hidden;
  ASSERT_EQ(m.rows(), 2 * fx.config.k_long);
  ASSERT_EQ(m.cols(), 2 * h);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t k = 0; k < fx.config.k_long; ++k) {
      for (std::size_t c = 0; c < h; ++c) {
        EXPECT_EQ(m.at(n * fx.config.k_long + k, c), tok.at(n, c));
        EXPECT_EQ(m.at(n * fx.config.k_long + k, h + c), fx.detok.f_long().at(k, c));
      }
    }
  }
}

TEST(Detokenizer, SingleModeAndIdenticalEmbeddings)
{
  ModelConfig c = test::tiny_model_config();
  c.k_long = 1;
  ParamStore store;
  Rng rng(73);
  const Detokenizer d = Detokenizer::create(store, c, rng);
  auto tok = test::random_tensor({3, c.hidden}, rng, 1.0, false);
  EXPECT_EQ(d.forward(tok).confidence.shape(), (Shape{3, 1}));

  DetokFixture fx;
  Tensor fl = fx.detok.f_long();
  auto data = fl.mutable_data();
  for (std::size_t k = 1; k < fx.config.k_long; ++k) {
    std::copy_n(data.begin(), fx.config.hidden, data.begin() + k * fx.config.hidden);
  }
  const Tensor m = fx.detok.expand_modes(tok);
  for (std::size_t k = 1; k < fx.config.k_long; ++k) {
    for (std::size_t col = 0; col < m.cols(); ++col) {
      EXPECT_EQ(m.at(k, col), m.at(0, col));
    }
  }
}

TEST(Detokenizer, UniformLogitsAverageShortEmbeddings)
{
  DetokFixture fx;
  fx.zero("detok.cls_short");
  Rng rng(74);
  auto mode_tok = test::random_tensor({1, 2 * fx.config.hidden}, rng, 1.0, false);
  auto [refined, logits] = fx.detok.short_term_refine(mode_tok);
  for (double v : logits.data()) {
    EXPECT_EQ(v, 0.0);
  }
  // With uniform probabilities the refine input is [mean(F_short); tok].
  std::vector<double> mean(fx.config.hidden, 0.0);
  for (std::size_t k = 0; k < fx.config.k_short; ++k) {
    for (std::size_t c = 0; c < fx.config.hidden; ++c) {
      mean[c] += fx.detok.f_short().at(k, c) / static_cast<double>(fx.config.k_short);
    }
  }
  std::vector<Linear> refine;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string base = "detok.refine." + std::to_string(i);
    refine.push_back({fx.store.get(base + ".w"), fx.store.get(base + ".b")});
  }
  const Tensor parts[2] = {Tensor::from({1, fx.config.hidden}, mean), mode_tok};
  const Tensor expected = mlp_forward(concat_cols(parts), refine);
  for (std::size_t c = 0; c < refined.numel(); ++c) {
    EXPECT_NEAR(refined.at(c), expected.at(c), 1e-12);
  }
}

TEST(Detokenizer, LocalIntentionDisabledHasNoLogits)
{
  ModelConfig c = test::tiny_model_config();
  c.local_intention_enabled = false;
  ParamStore store;
  Rng rng(75);
  const Detokenizer d = Detokenizer::create(store, c, rng);
  auto tok = test::random_tensor({2, c.hidden}, rng, 1.0, false);
  const ModeOutputs out = d.forward(tok);
  EXPECT_FALSE(out.short_logits.defined());
  EXPECT_EQ(out.refined.rows(), 2 * c.k_long);
}

TEST(Detokenizer, HeadShapesAndZeroWeights)
{
  DetokFixture fx;
  Rng rng(76);
  auto tok = test::random_tensor({2, fx.config.hidden}, rng, 1.0, false);
  const ModeOutputs out = fx.detok.forward(tok);
  EXPECT_EQ(fx.detok.decode_short(out.refined).shape(), (Shape{2 * fx.config.k_long, 2 * std::size_t(fx.config.t_token)}));
  EXPECT_EQ(fx.detok.decode_long(out.refined).shape(), (Shape{2 * fx.config.k_long, 2 * std::size_t(fx.config.t_future)}));
  EXPECT_EQ(out.confidence.shape(), (Shape{2, fx.config.k_long}));
  fx.zero("detok.dec_short");
  fx.zero("detok.dec_long");
  const Tensor s = fx.detok.decode_short(out.refined);
  const Tensor l = fx.detok.decode_long(out.refined);
  for (double v : s.data()) {
    EXPECT_EQ(v, 0.0);
  }
  for (double v : l.data()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(Detokenizer, Gradients)
{
  DetokFixture fx;
  Rng rng(77);
  auto tok = test::random_tensor({2, fx.config.hidden}, rng);
  const std::size_t m = 2 * fx.config.k_long;
  auto w_s = test::random_tensor({m, 2 * std::size_t(fx.config.t_token)}, rng, 1.0, false);
  auto w_l = test::random_tensor({m, 2 * std::size_t(fx.config.t_future)}, rng, 1.0, false);
  auto w_c = test::random_tensor({2, fx.config.k_long}, rng, 1.0, false);
  auto w_k = test::random_tensor({m, fx.config.k_short}, rng, 1.0, false);
  std::vector<Tensor> inputs{tok};
  for (const auto & [name, t] : fx.store.items()) {
    inputs.push_back(t);
  }
  auto r = test::grad_check(
    [&] {
      const ModeOutputs o = fx.detok.forward(tok);
      const Tensor terms[4] = {
        sum(mul(fx.detok.decode_short(o.refined), w_s)), sum(mul(fx.detok.decode_long(o.refined), w_l)),
        sum(mul(o.confidence, w_c)), sum(mul(o.short_logits, w_k))};
      return add(add(terms[0], terms[1]), add(terms[2], terms[3]));
    },
    inputs, 60, rng);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Anchors, DistinctPointsAreFixpoint)
{
  const std::vector<Point2D> pts{{0, 0}, {0, 10}, {10, 0}, {10, 10}};
  auto r = kmeans(pts, 4, 5);
  auto centers = r.centers;
  std::sort(centers.begin(), centers.end(), [](auto a, auto b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  EXPECT_EQ(centers, pts);
}

}  // namespace
}  // namespace amp
