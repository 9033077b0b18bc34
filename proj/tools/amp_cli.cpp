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
#include "amp/checkpoint.hpp"
#include "amp/config.hpp"
#include "amp/errors.hpp"
#include "amp/inference.hpp"
#include "amp/metrics.hpp"
#include "amp/scene.hpp"
#include "amp/svg.hpp"
#include "amp/training.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void write_text(const std::string & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << text;
}

void require_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
}

amp::Config read_config(const std::string & path)
{
  if (path.empty()) {
    return {};
  }
  require_file(path);
  return amp::load_config(path);
}

std::vector<double> parse_list(const std::string & text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception &) {
      throw amp::UsageError("not a number list: '" + text + "'");
    }
  }
  return out;
}

struct GenArgs
{
  std::string kind{"mixed"};
  std::size_t count{8};
  std::uint64_t seed{0};
  std::string out;
  std::string config;
};

int run_gen_data(const GenArgs & a)
{
  const amp::Config cfg = read_config(a.config);
  amp::SceneGenConfig gen;
  gen.dt = cfg.model.dt;
  gen.t_obs = cfg.model.t_obs;
  gen.t_future = cfg.model.t_future;
  const amp::ScenarioKind kinds[] = {
    amp::ScenarioKind::kStraight, amp::ScenarioKind::kTurn, amp::ScenarioKind::kCutIn,
    amp::ScenarioKind::kPedestrianCross};
  const bool mixed = a.kind == "mixed";
  const amp::ScenarioKind single = mixed ? amp::ScenarioKind::kStraight : amp::parse_scenario_kind(a.kind);
  std::vector<amp::SceneSample> scenes;
  for (std::size_t i = 0; i < a.count; ++i) {
    scenes.push_back(amp::generate_scene(mixed ? kinds[i % 4] : single, a.seed + i, gen));
  }
  amp::save_scenes(scenes, a.out);
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs
{
  std::string data;
  std::string config;
  std::string out;
  std::string log;
};

int run_train(const TrainArgs & a)
{
  require_file(a.data);
  const amp::Config cfg = read_config(a.config);
  const std::vector<amp::SceneSample> scenes = amp::load_scenes(a.data);
  if (scenes.empty()) {
    throw std::runtime_error("no scenes in " + a.data);
  }
  amp::AmpModel model = amp::AmpModel::create(cfg.model, cfg.train.seed);
  model.anchors = amp::fit_anchors(scenes, cfg.model, cfg.train.seed);
  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) {
    throw std::runtime_error("cannot write " + log_path);
  }
  const amp::TrainResult res = amp::train(model, scenes, cfg.train, &log);
  amp::save_checkpoint(model, a.out);
  if (!res.steps.empty()) {
    std::printf(
      "trained %zu steps; loss %.6f -> %.6f; checkpoint %s\n", res.steps.size(), res.steps.front().loss.total,
      res.steps.back().loss.total, a.out.c_str());
  }
  return kExitOk;
}

struct RolloutArgs
{
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string config;
  double tau{-1.0};
  bool no_cache{false};
  bool independent{false};
};

amp::InferenceConfig inference_config(const RolloutArgs & a)
{
  amp::InferenceConfig infer = read_config(a.config).infer;
  if (a.tau >= 0.0) {
    infer.tau = a.tau;
  }
  if (a.no_cache) {
    infer.use_cache = false;
  }
  if (a.independent) {
    infer.independent = true;
  }
  return infer;
}

std::vector<amp::AgentPrediction> predict_all(
  const amp::AmpModel & model, const std::vector<amp::SceneSample> & scenes, const amp::InferenceConfig & infer)
{
  std::vector<amp::AgentPrediction> preds;
  for (const amp::SceneSample & s : scenes) {
    for (amp::AgentPrediction & p : amp::rollout(model, s, infer)) {
      preds.push_back(std::move(p));
    }
  }
  return preds;
}

int run_rollout(const RolloutArgs & a)
{
  require_file(a.checkpoint);
  require_file(a.data);
  const amp::AmpModel model = amp::load_checkpoint(a.checkpoint);
  const std::vector<amp::SceneSample> scenes = amp::load_scenes(a.data);
  const std::vector<amp::AgentPrediction> preds = predict_all(model, scenes, inference_config(a));
  amp::save_predictions(preds, a.out);
  std::cout << "wrote " << preds.size() << " agent predictions to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs
{
  std::string pred;
  std::string data;
  std::string out;
  std::size_t stride{1};
  double miss_threshold{2.0};
  std::string horizons;
  bool per_type{false};
};

int run_eval(const EvalArgs & a)
{
  require_file(a.pred);
  require_file(a.data);
  amp::EvalConfig cfg;
  cfg.eval_stride = a.stride;
  cfg.miss_threshold = a.miss_threshold;
  cfg.map_per_type = a.per_type;
  if (!a.horizons.empty()) {
    for (double h : parse_list(a.horizons)) {
      cfg.measure_horizons.push_back(static_cast<std::size_t>(h));
    }
  }
  const std::vector<amp::AgentPrediction> preds = amp::load_predictions(a.pred);
  if (preds.empty()) {
    throw std::runtime_error("no predictions in " + a.pred);
  }
  const amp::EvalReport report = amp::evaluate(preds, amp::load_scenes(a.data), cfg);
  write_text(a.out, amp::report_to_json(report) + "\n");
  std::printf(
    "agents %zu  minADE %.4f  minFDE %.4f  MR %.4f  mAP %.4f\n", report.agents, report.min_ade.value_or(-1.0),
    report.min_fde.value_or(-1.0), report.miss_rate.value_or(-1.0), report.map.value_or(-1.0));
  return kExitOk;
}

struct PlotArgs
{
  std::string data;
  std::string pred;
  std::string scene;
  std::string out;
};

int run_plot(const PlotArgs & a)
{
  require_file(a.data);
  const std::vector<amp::SceneSample> scenes = amp::load_scenes(a.data);
  if (scenes.empty()) {
    throw std::runtime_error("no scenes in " + a.data);
  }
  const amp::SceneSample * scene = &scenes.front();
  if (!a.scene.empty()) {
    scene = nullptr;
    for (const amp::SceneSample & s : scenes) {
      if (s.scene_id == a.scene) {
        scene = &s;
      }
    }
    if (!scene) {
      throw std::runtime_error("scene '" + a.scene + "' not found in " + a.data);
    }
  }
  std::vector<amp::AgentPrediction> preds;
  if (!a.pred.empty()) {
    require_file(a.pred);
    for (amp::AgentPrediction & p : amp::load_predictions(a.pred)) {
      if (a.scene.empty() || p.scene_id == scene->scene_id) {
        preds.push_back(std::move(p));
      }
    }
  }
  write_text(a.out, amp::render_svg(*scene, preds));
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

struct AblateArgs
{
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string taus{"0,0.5,1.0"};
  double miss_threshold{2.0};
};

int run_ablate(const AblateArgs & a)
{
  require_file(a.checkpoint);
  require_file(a.data);
  const amp::AmpModel model = amp::load_checkpoint(a.checkpoint);
  const std::vector<amp::SceneSample> scenes = amp::load_scenes(a.data);
  amp::EvalConfig eval;
  eval.miss_threshold = a.miss_threshold;
  std::string table = "| tau | minADE | minFDE | MR | mAP |\n|---|---|---|---|---|\n";
  for (double tau : parse_list(a.taus)) {
    amp::InferenceConfig infer;
    infer.tau = tau;
    const amp::EvalReport r = amp::evaluate(predict_all(model, scenes, infer), scenes, eval);
    char row[256];
    std::snprintf(
      row, sizeof(row), "| %.2f | %.4f | %.4f | %.4f | %.4f |\n", tau, r.min_ade.value_or(-1.0),
      r.min_fde.value_or(-1.0), r.miss_rate.value_or(-1.0), r.map.value_or(-1.0));
    table += row;
  }
  write_text(a.out, table);
  std::cout << table;
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"amp: autoregressive multi-mode motion prediction"};
  app.require_subcommand(1);

  GenArgs gen;
  auto * gen_cmd = app.add_subcommand("gen-data", "Generate synthetic scenes as JSONL");
  gen_cmd->add_option("--kind", gen.kind, "straight|turn|cut_in|pedestrian_cross|mixed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of scenes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Seed of the first scene")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();
  gen_cmd->add_option("--config", gen.config, "Config file (model.dt, model.t_obs, model.t_future)");

  TrainArgs tr;
  auto * train_cmd = app.add_subcommand("train", "Fit anchors and train a model");
  train_cmd->add_option("--data", tr.data, "Training scenes JSONL")->required();
  train_cmd->add_option("--config", tr.config, "Config file");
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Per-epoch loss log (default <out>.log.jsonl)");

  RolloutArgs ro;
  auto * rollout_cmd = app.add_subcommand("rollout", "Predict multi-mode futures of focal agents");
  rollout_cmd->add_option("--checkpoint", ro.checkpoint, "Checkpoint path")->required();
  rollout_cmd->add_option("--data", ro.data, "Scenes JSONL")->required();
  rollout_cmd->add_option("--out", ro.out, "Predictions JSONL path")->required();
  rollout_cmd->add_option("--config", ro.config, "Config file (infer.*, score.*, nms.* keys)");
  rollout_cmd->add_option("--tau", ro.tau, "Fuse exponent (overrides config)");
  rollout_cmd->add_flag("--no-cache", ro.no_cache, "Recompute every lane from scratch each step");
  rollout_cmd->add_flag("--independent", ro.independent, "Emit the first-step long-horizon head only");

  EvalArgs ev;
  auto * eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", ev.pred, "Predictions JSONL")->required();
  eval_cmd->add_option("--data", ev.data, "Scenes JSONL")->required();
  eval_cmd->add_option("--out", ev.out, "Report JSON path")->required();
  eval_cmd->add_option("--stride", ev.stride, "Evaluate every n-th future step")->capture_default_str();
  eval_cmd->add_option("--miss-threshold", ev.miss_threshold, "Final-step hit radius in meters")->capture_default_str();
  eval_cmd->add_option("--horizons", ev.horizons, "Comma-separated 0-based future steps");
  eval_cmd->add_flag("--per-type", ev.per_type, "Average mAP over agent types");

  PlotArgs pl;
  auto * plot_cmd = app.add_subcommand("plot", "Render a scene and its predictions as SVG");
  plot_cmd->add_option("--data", pl.data, "Scenes JSONL")->required();
  plot_cmd->add_option("--pred", pl.pred, "Predictions JSONL");
  plot_cmd->add_option("--scene", pl.scene, "Scene id (default: first scene)");
  plot_cmd->add_option("--out", pl.out, "SVG path")->required();

  AblateArgs ab;
  auto * ablate_cmd = app.add_subcommand("ablate", "Compare fuse exponents end to end");
  ablate_cmd->add_option("--checkpoint", ab.checkpoint, "Checkpoint path")->required();
  ablate_cmd->add_option("--data", ab.data, "Scenes JSONL")->required();
  ablate_cmd->add_option("--out", ab.out, "Markdown table path")->required();
  ablate_cmd->add_option("--taus", ab.taus, "Comma-separated tau values")->capture_default_str();
  ablate_cmd->add_option("--miss-threshold", ab.miss_threshold, "Final-step hit radius in meters")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App * sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kExitUsage;
  }

  const CLI::App * used = app.get_subcommands().front();
  try {
    if (used == gen_cmd) {
      return run_gen_data(gen);
    }
    if (used == train_cmd) {
      return run_train(tr);
    }
    if (used == rollout_cmd) {
      return run_rollout(ro);
    }
    if (used == eval_cmd) {
      return run_eval(ev);
    }
    if (used == plot_cmd) {
      return run_plot(pl);
    }
    if (used == ablate_cmd) {
      return run_ablate(ab);
    }
  } catch (const amp::UsageError & e) {
    std::cerr << "error: " << e.what() << "\n\n" << used->help();
    return kExitUsage;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
