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
#include "amp/errors.hpp"
#include "amp/inference.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace amp
{
namespace
{

namespace fs = std::filesystem;

struct RunResult
{
  int code{-1};
  std::string output;
};

RunResult run(const std::string & args)
{
  const std::string cmd = std::string(AMP_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE * pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    return r;
  }
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) {
    r.output.append(buf, n);
  }
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() /
           ("amp_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string & name) const { return (dir_ / name).string(); }

  /// Tiny model with six long modes, trained for two steps.
  void write_small_config()
  {
    std::ofstream(path("small.cfg")) << "model.hidden = 16\nmodel.num_heads = 2\nmodel.pointnet_hidden = 16\n"
                                        "model.pos_hidden = 8\nmodel.num_frequencies = 4\nmodel.ffn_hidden = 16\n"
                                        "model.k_long = 6\nmodel.k_short = 4\ntrain.max_steps = 2\n"
                                        "train.batch_size = 2\n";
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpExitsZero)
{
  EXPECT_EQ(run("--help").code, 0);
  for (const char * sub : {"gen-data", "train", "rollout", "eval", "plot", "ablate"}) {
    const RunResult r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.output.find("Usage"), std::string::npos) << sub;
  }
}

TEST_F(CliTest, UsageErrorsExitTwo)
{
  RunResult r = run("gen-data --kind bogus --out " + path("x.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("Usage"), std::string::npos);
  EXPECT_EQ(run("gen-data").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("eval --pred a --data b --out c --stride x").code, 2);
}

TEST_F(CliTest, MissingFilesExitOneWithPath)
{
  const std::string missing = path("nothere.ckpt");
  const RunResult r = run("rollout --checkpoint " + missing + " --data " + path("d.jsonl") + " --out " + path("p.jsonl"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(missing), std::string::npos);
  const RunResult t = run("train --data " + path("none.jsonl") + " --out " + path("m.ckpt"));
  EXPECT_EQ(t.code, 1);
  EXPECT_NE(t.output.find("none.jsonl"), std::string::npos);
}

TEST_F(CliTest, GenDataEmptyAndRepeatable)
{
  ASSERT_EQ(run("gen-data --count 0 --out " + path("empty.jsonl")).code, 0);
  EXPECT_TRUE(fs::exists(path("empty.jsonl")));
  EXPECT_EQ(fs::file_size(path("empty.jsonl")), 0u);
  ASSERT_EQ(run("gen-data --count 5 --seed 3 --out " + path("a.jsonl")).code, 0);
  ASSERT_EQ(run("gen-data --count 5 --seed 3 --out " + path("b.jsonl")).code, 0);
  EXPECT_FALSE(slurp(path("a.jsonl")).empty());
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  ASSERT_EQ(run("gen-data --kind turn --count 2 --out " + path("t.jsonl")).code, 0);
  EXPECT_EQ(load_scenes(path("t.jsonl")).size(), 2u);
}

TEST_F(CliTest, EvalOnEmptyPredictionsExitsOne)
{
  ASSERT_EQ(run("gen-data --count 1 --out " + path("d.jsonl")).code, 0);
  std::ofstream(path("p.jsonl")).flush();
  const RunResult r = run("eval --pred " + path("p.jsonl") + " --data " + path("d.jsonl") + " --out " + path("r.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(CliTest, PipelineAndPlot)
{
  write_small_config();
  const std::string cfg = " --config " + path("small.cfg");
  ASSERT_EQ(run("gen-data --count 2 --kind straight --out " + path("d.jsonl") + cfg).code, 0);
  ASSERT_EQ(run("gen-data --count 1 --kind turn --seed 9 --out " + path("other.jsonl") + cfg).code, 0);
  const RunResult tr = run("train --data " + path("d.jsonl") + " --out " + path("m.ckpt") + cfg);
  ASSERT_EQ(tr.code, 0) << tr.output;
  ASSERT_EQ(run("rollout --checkpoint " + path("m.ckpt") + " --data " + path("d.jsonl") + " --out " + path("p.jsonl")).code, 0);
  const RunResult ev = run("eval --pred " + path("p.jsonl") + " --data " + path("d.jsonl") + " --out " + path("r.json"));
  ASSERT_EQ(ev.code, 0) << ev.output;
  EXPECT_NE(slurp(path("r.json")).find("\"map\""), std::string::npos);

  const std::string scene = load_scenes(path("d.jsonl")).front().scene_id;
  const std::string plot =
    "plot --data " + path("d.jsonl") + " --pred " + path("p.jsonl") + " --scene " + scene + " --out ";
  ASSERT_EQ(run(plot + path("a.svg")).code, 0);
  ASSERT_EQ(run(plot + path("b.svg")).code, 0);
  const std::string svg = slurp(path("a.svg"));
  EXPECT_EQ(svg, slurp(path("b.svg")));
  const std::regex group("<g class=\"mode\" data-agent=\"(-?\\d+)\" data-mode=\"(\\d+)\"");
  std::set<std::string> modes;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), group); it != std::sregex_iterator(); ++it) {
    modes.insert((*it)[1].str() + "/" + (*it)[2].str());
  }
  EXPECT_EQ(modes.size(), 6u);

  ASSERT_EQ(run("plot --data " + path("d.jsonl") + " --out " + path("map.svg")).code, 0);
  EXPECT_EQ(slurp(path("map.svg")).find("class=\"mode\""), std::string::npos);

  const RunResult mismatch = run("plot --data " + path("other.jsonl") + " --pred " + path("p.jsonl") + " --out " + path("x.svg"));
  EXPECT_EQ(mismatch.code, 1);
  EXPECT_NE(mismatch.output.find("does not match"), std::string::npos);

  const RunResult ab = run("ablate --checkpoint " + path("m.ckpt") + " --data " + path("d.jsonl") + " --out " + path("t.md"));
  ASSERT_EQ(ab.code, 0) << ab.output;
  const std::string table = slurp(path("t.md"));
  for (const char * tau : {"| 0.00 |", "| 0.50 |", "| 1.00 |"}) {
    EXPECT_NE(table.find(tau), std::string::npos) << tau;
  }
}

TEST(Checkpoint, RoundTripPreservesModel)
{
  ModelConfig c = test::tiny_model_config();
  c.anchors_per_type = true;
  const auto scenes = test::mixed_scenes(4, 40, test::gen_config(c));
  AmpModel model = AmpModel::create(c, 12);
  model.anchors = fit_anchors(scenes, c, 0);
  const std::string p = (fs::temp_directory_path() / ("amp_ckpt_" + std::to_string(::getpid()))).string();
  save_checkpoint(model, p);
  const AmpModel back = load_checkpoint(p);
  ASSERT_EQ(back.params.items().size(), model.params.items().size());
  for (std::size_t i = 0; i < model.params.items().size(); ++i) {
    const auto & [name, t] = model.params.items()[i];
    const auto & [bname, bt] = back.params.items()[i];
    EXPECT_EQ(name, bname);
    ASSERT_EQ(t.shape(), bt.shape());
    EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), bt.data().begin())) << name;
  }
  EXPECT_EQ(back.anchors.long_anchors, model.anchors.long_anchors);
  EXPECT_EQ(back.anchors.short_anchors, model.anchors.short_anchors);
  const auto a = rollout(model, scenes[1], {});
  const auto b = rollout(back, scenes[1], {});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(prediction_to_json_line(a[i]), prediction_to_json_line(b[i]));
  }

  std::ofstream(p, std::ios::binary | std::ios::trunc) << "AMPCKPT1garbage";
  EXPECT_THROW(load_checkpoint(p), ParseError);
  fs::remove(p);
}

}  // namespace
}  // namespace amp
