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

#ifndef AMP__CONFIG_HPP_
#define AMP__CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace amp
{

/// Architecture, tokenization and ablation switches. Stored in checkpoints.
struct ModelConfig
{
  double dt{0.2};
  int t_obs{10};
  int t_future{40};
  int t_token{5};

  std::size_t hidden{64};
  std::size_t num_heads{4};
  std::size_t pointnet_hidden{64};
  std::size_t pos_hidden{32};
  std::size_t num_frequencies{8};
  double base_frequency{1.0 / 128.0};
  std::size_t context_layers{2};
  std::size_t decoder_layers{2};
  std::size_t ffn_hidden{128};
  std::size_t k_neighbors{16};
  std::size_t k_long{6};
  std::size_t k_short{8};
  double rope_base{10000.0};
  double dropout{0.0};

  // Ablations.
  bool pe_global_delta{false};
  bool rope_enabled{true};
  bool rope_feature_only{false};
  bool tpe_enabled{true};
  bool spatial_attn_enabled{true};
  bool local_intention_enabled{true};
  bool anchors_per_type{false};

  int l_obs() const { return t_obs / t_token; }
  int l_future() const { return t_future / t_token; }
  int l_total() const { return l_obs() + l_future(); }
  /// Throws ConfigError when token lengths or widths are inconsistent.
  void validate() const;
};

struct TrainConfig
{
  double lr{1e-4};
  double weight_decay{5e-3};
  double grad_clip{1.0};
  double beta1{0.9};
  double beta2{0.999};
  double adam_eps{1e-8};
  int epochs{50};
  std::vector<int> decay_epochs{35, 40, 45, 49, 50};
  std::size_t batch_size{4};
  /// Stops after this many optimizer steps when > 0, regardless of epochs.
  std::size_t max_steps{0};
  std::uint64_t seed{0};
  std::size_t max_extra_nonfocal{16};
  /// Dropout is switched off for this many final epochs.
  int dropout_off_last_epochs{2};

  double w_reg_short{1.0};
  double w_cls_short{1.0};
  double w_reg_long{1.0};
  double w_cls_long{1.0};
  double w_reg_dense{1.0};

  void validate() const;
};

struct InferenceConfig
{
  double tau{0.5};
  /// Emit the first-step long-horizon head directly (no autoregression).
  bool independent{false};
  bool score_first_step_only{false};
  bool use_cache{true};
  /// Modes kept after NMS; 0 keeps all K_long lanes.
  std::size_t nms_out_count{0};
  double nms_dist_threshold{2.0};
};

struct Config
{
  ModelConfig model;
  TrainConfig train;
  InferenceConfig infer;
};

/**
 * @brief Parses `key = value` lines ('#' starts a comment) over defaults.
 *
 * Unknown keys and malformed values raise ParseError with the line number.
 */
Config parse_config(const std::string & text, const Config & defaults = {});
Config load_config(const std::string & path, const Config & defaults = {});
/// Serializes every key; parse_config(config_to_text(c)) == c.
std::string config_to_text(const Config & config);

}  // namespace amp

#endif  // AMP__CONFIG_HPP_
