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

#ifndef AMP__TEST_SUPPORT_HPP_
#define AMP__TEST_SUPPORT_HPP_

#include "amp/config.hpp"
#include "amp/random.hpp"
#include "amp/scene.hpp"
#include "amp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace amp::test
{

struct GradCheckResult
{
  double max_rel_error{0.0};
  std::size_t probes{0};
  std::string worst;
};

inline double relative_error(double analytic, double numeric)
{
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
  return std::abs(analytic - numeric) / denom;
}

/**
 * @brief Central-difference check of d loss / d inputs at `probes` random entries.
 *
 * `loss` must rebuild the graph from the current input values on every call.
 */
inline GradCheckResult grad_check(
  const std::function<Tensor()> & loss, std::vector<Tensor> inputs, std::size_t probes, Rng & rng,
  double step = 1e-5)
{
  for (auto & t : inputs) {
    t.zero_grad();
  }
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto & t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) {
      analytic.back().assign(t.numel(), 0.0);
    }
  }
  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t ti = rng.index(inputs.size());
    const std::size_t ei = rng.index(inputs[ti].numel());
    auto data = inputs[ti].mutable_data();
    const double saved = data[ei];
    data[ei] = saved + step;
    const double up = loss().item();
    data[ei] = saved - step;
    const double down = loss().item();
    data[ei] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[ti][ei], numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = "input " + std::to_string(ti) + "[" + std::to_string(ei) + "] analytic " +
                     std::to_string(analytic[ti][ei]) + " numeric " + std::to_string(numeric);
    }
    ++result.probes;
  }
  return result;
}

inline Tensor random_tensor(Shape shape, Rng & rng, double scale = 1.0, bool requires_grad = true)
{
  std::vector<double> v(shape_numel(shape));
  for (auto & x : v) {
    x = rng.normal(0.0, scale);
  }
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// A config small enough for exhaustive property tests.
inline ModelConfig tiny_model_config()
{
  ModelConfig c;
  c.hidden = 16;
  c.num_heads = 2;
  c.pointnet_hidden = 16;
  c.pos_hidden = 8;
  c.num_frequencies = 4;
  c.ffn_hidden = 16;
  c.k_neighbors = 6;
  c.k_long = 3;
  c.k_short = 4;
  c.t_future = 20;
  return c;
}

inline SceneGenConfig gen_config(const ModelConfig & c)
{
  return {c.dt, c.t_obs, c.t_future};
}

inline std::vector<SceneSample> mixed_scenes(std::size_t count, std::uint64_t seed, const SceneGenConfig & g)
{
  static const ScenarioKind kinds[] = {
    ScenarioKind::kStraight, ScenarioKind::kTurn, ScenarioKind::kCutIn, ScenarioKind::kPedestrianCross};
  std::vector<SceneSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_scene(kinds[i % 4], seed + i, g));
  }
  return out;
}

}  // namespace amp::test

#endif  // AMP__TEST_SUPPORT_HPP_
