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

#include "amp/config.hpp"

#include "amp/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace amp
{

void ModelConfig::validate() const
{
  if (t_token <= 0 || t_obs <= 0 || t_future <= 0) {
    throw ConfigError("t_obs, t_future and t_token must be positive");
  }
  if (t_obs % t_token != 0 || t_future % t_token != 0) {
    throw ConfigError("t_token must divide t_obs and t_future");
  }
  if (t_token > t_obs) {
    throw ConfigError("t_token must not exceed t_obs");
  }
  if (num_heads == 0 || hidden % num_heads != 0) {
    throw ConfigError("hidden width must be divisible by num_heads");
  }
  if ((hidden / num_heads) % 2 != 0) {
    throw ConfigError("head dimension must be even for RoPE");
  }
  if (k_long == 0 || k_short == 0 || k_neighbors == 0) {
    throw ConfigError("k_long, k_short and k_neighbors must be >= 1");
  }
  if (num_frequencies == 0 || !(base_frequency > 0.0)) {
    throw ConfigError("frequency schedule needs >= 1 frequency and positive base");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must be in [0, 1)");
  }
  if (!(dt > 0.0)) {
    throw ConfigError("dt must be positive");
  }
}

void TrainConfig::validate() const
{
  if (!(lr >= 0.0)) {
    throw ConfigError("lr must be non-negative");
  }
  if (batch_size == 0) {
    throw ConfigError("batch_size must be >= 1");
  }
  for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] < decay_epochs[i - 1]) {
      throw ConfigError("decay_epochs must be sorted");
    }
  }
  if (!(grad_clip > 0.0)) {
    throw ConfigError("grad_clip must be positive");
  }
}

namespace
{
struct Field
{
  std::function<void(const std::string &)> set;
  std::function<std::string()> get;
};

std::string fmt_double(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double to_double(const std::string & s)
{
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

template <typename T>
T to_unsigned(const std::string & s)
{
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string & s)
{
  if (s == "true" || s == "1") {
    return true;
  }
  if (s == "false" || s == "0") {
    return false;
  }
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

std::map<std::string, Field> fields(Config & c)
{
  std::map<std::string, Field> f;
  auto num = [&f](const std::string & key, double & ref) {
    f[key] = {[&ref](const std::string & s) { ref = to_double(s); }, [&ref] { return fmt_double(ref); }};
  };
  auto size = [&f](const std::string & key, std::size_t & ref) {
    f[key] = {
      [&ref](const std::string & s) { ref = to_unsigned<std::size_t>(s); },
      [&ref] { return std::to_string(ref); }};
  };
  auto integer = [&f](const std::string & key, int & ref) {
    f[key] = {[&ref](const std::string & s) { ref = to_unsigned<int>(s); }, [&ref] { return std::to_string(ref); }};
  };
  auto flag = [&f](const std::string & key, bool & ref) {
    f[key] = {[&ref](const std::string & s) { ref = to_bool(s); }, [&ref] { return std::string(ref ? "true" : "false"); }};
  };
  ModelConfig & m = c.model;
  num("model.dt", m.dt);
  integer("model.t_obs", m.t_obs);
  integer("model.t_future", m.t_future);
  integer("model.t_token", m.t_token);
  size("model.hidden", m.hidden);
  size("model.num_heads", m.num_heads);
  size("model.pointnet_hidden", m.pointnet_hidden);
  size("model.pos_hidden", m.pos_hidden);
  size("model.num_frequencies", m.num_frequencies);
  num("model.base_frequency", m.base_frequency);
  size("model.context_layers", m.context_layers);
  size("model.decoder_layers", m.decoder_layers);
  size("model.ffn_hidden", m.ffn_hidden);
  size("model.k_neighbors", m.k_neighbors);
  size("model.k_long", m.k_long);
  size("model.k_short", m.k_short);
  num("model.rope_base", m.rope_base);
  num("model.dropout", m.dropout);
  flag("pe.global_delta", m.pe_global_delta);
  flag("rope.enabled", m.rope_enabled);
  flag("rope.feature_only", m.rope_feature_only);
  flag("tpe.enabled", m.tpe_enabled);
  flag("spatial_attn.enabled", m.spatial_attn_enabled);
  flag("local_intention.enabled", m.local_intention_enabled);
  flag("anchors.per_type", m.anchors_per_type);

  TrainConfig & t = c.train;
  num("train.lr", t.lr);
  num("train.weight_decay", t.weight_decay);
  num("train.grad_clip", t.grad_clip);
  num("train.beta1", t.beta1);
  num("train.beta2", t.beta2);
  num("train.adam_eps", t.adam_eps);
  integer("train.epochs", t.epochs);
  f["train.decay_epochs"] = {
    [&t](const std::string & s) {
      t.decay_epochs.clear();
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) {
          t.decay_epochs.push_back(to_unsigned<int>(item.substr(b, e - b + 1)));
        }
      }
    },
    [&t] {
      std::string out;
      for (std::size_t i = 0; i < t.decay_epochs.size(); ++i) {
        out += (i ? "," : "") + std::to_string(t.decay_epochs[i]);
      }
      return out;
    }};
  size("train.batch_size", t.batch_size);
  size("train.max_steps", t.max_steps);
  f["train.seed"] = {
    [&t](const std::string & s) { t.seed = to_unsigned<std::uint64_t>(s); },
    [&t] { return std::to_string(t.seed); }};
  size("train.max_extra_nonfocal", t.max_extra_nonfocal);
  integer("train.dropout_off_last_epochs", t.dropout_off_last_epochs);
  num("loss.reg_short", t.w_reg_short);
  num("loss.cls_short", t.w_cls_short);
  num("loss.reg_long", t.w_reg_long);
  num("loss.cls_long", t.w_cls_long);
  num("loss.reg_dense", t.w_reg_dense);

  InferenceConfig & i = c.infer;
  num("infer.tau", i.tau);
  flag("infer.independent", i.independent);
  flag("score.first_step_only", i.score_first_step_only);
  flag("infer.use_cache", i.use_cache);
  size("nms.out_count", i.nms_out_count);
  num("nms.dist_threshold", i.nms_dist_threshold);
  return f;
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

Config parse_config(const std::string & text, const Config & defaults)
{
  Config c = defaults;
  auto f = fields(c);
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", lineno);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = f.find(key);
    if (it == f.end()) {
      throw ParseError("unknown key '" + key + "'", lineno);
    }
    try {
      it->second.set(value);
    } catch (const std::invalid_argument & e) {
      throw ParseError(key + ": " + e.what(), lineno);
    }
  }
  return c;
}

Config load_config(const std::string & path, const Config & defaults)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), defaults);
}

std::string config_to_text(const Config & config)
{
  Config copy = config;
  std::string out;
  for (const auto & [key, field] : fields(copy)) {
    out += key + " = " + field.get() + "\n";
  }
  return out;
}

}  // namespace amp
