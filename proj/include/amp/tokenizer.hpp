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


#ifndef AMP__TOKENIZER_HPP_
#define AMP__TOKENIZER_HPP_

#include "amp/config.hpp"
#include "amp/nn.hpp"
#include "amp/scene.hpp"

#include <optional>
#include <vector>

namespace amp
{

enum class TokenKind { kMap, kAgentObs, kAgentFuture };

/**
 * @brief Everything about a token except its feature vector.
 *
 * Features live in a separate [N, H] tensor so a batch of tokens stays one graph node.
 */
struct TokenInfo
{
  Pose2D frame;
  /// Token step; 0 is the earliest observed interval. Always 0 for map tokens.
  int temporal_index{0};
  std::int64_t owner{0};
  TokenKind kind{TokenKind::kMap};
  AgentType agent_type{AgentType::kVehicle};
  /// False when the interval's final step is missing; such tokens never take part in attention.
  bool valid{true};
};

inline constexpr std::size_t kMapPointFeatures = 2 + kNumPolylineTypes;
inline constexpr std::size_t kAgentPointFeatures = 6 + kNumAgentTypes;

/// Origin at the first point, x-axis toward the second. GeometryError if they coincide.
Pose2D map_frame(const MapPolyline & polyline);

/// Pose at the last step of interval `interval` (steps [interval * t_token, (interval + 1) * t_token)).
std::optional<Pose2D> agent_interval_frame(const AgentTrack & track, int interval, int t_token);

/// Per-point rows [local x, local y, type one-hot], row-major [points, kMapPointFeatures].
std::vector<double> map_point_features(const MapPolyline & polyline, const Pose2D & frame);

/**
 * @brief Per-step rows [local x, local y, local vx, local vy, local heading, valid, type one-hot].
 *
 * Missing steps are zero apart from the type one-hot. Throws GeometryError if the
 * interval's final step does not land on the local origin with zero heading.
 */
std::vector<double> agent_interval_features(
  const AgentTrack & track, int interval, int t_token, const Pose2D & frame);

/// Per-point MLP, max-pool within each element, output MLP.
struct PointNet
{
  Mlp point_mlp;
  Mlp out_mlp;

  static PointNet create(
    ParamStore & store, const std::string & name, std::size_t in, std::size_t hidden,
    std::size_t out, Rng & rng);
  /// points [P, in]; element e owns rows [offsets[e], offsets[e + 1]).
  Tensor forward(const Tensor & points, std::span<const std::size_t> offsets) const;
};

struct TokenBatch
{
  Tensor features;  // [N, H]
  std::vector<TokenInfo> info;

  std::size_t size() const { return info.size(); }
};

/// One agent interval to tokenize.
struct IntervalRef
{
  const AgentTrack * track{nullptr};
  int interval{0};
  TokenKind kind{TokenKind::kAgentObs};
};

class Tokenizer
{
public:
  static Tokenizer create(ParamStore & store, const ModelConfig & config, Rng & rng);

  TokenBatch encode_map(const std::vector<MapPolyline> & map) const;
  /// Masked intervals get a zero feature row and valid = false.
  TokenBatch encode_intervals(std::span<const IntervalRef> intervals) const;

  /// L_obs observed tokens, plus L_future future tokens when `with_future`.
  std::vector<IntervalRef> agent_intervals(const AgentTrack & track, bool with_future) const;

  const PointNet & map_net() const { return map_net_; }
  const PointNet & agent_net() const { return agent_net_; }

private:
  ModelConfig config_;
  PointNet map_net_;
  PointNet agent_net_;
};

}  // namespace amp

#endif  // AMP__TOKENIZER_HPP_
