// Copyright 2026 The Crossview Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>

#include "crossview/pipeline.hpp"
#include "crossview/texture_fusion.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace crossview {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd =
      std::string(CROSSVIEW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const std::vector<std::string> kChain = {
    "synth --width 256 --height 128", "refine", "fuse",
    "render --width 256 --height 128", "condition", "pair",
    "split --tile-m 20", "metrics", "preview"};

void run_chain(const fs::path& out) {
  for (const auto& stage : kChain)
    ASSERT_EQ(run(stage + " --out " + q(out)), 0) << stage;
}

// Relative path -> bytes for every file except the run record.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "run.json") continue;
    out[fs::relative(e.path(), root).generic_string()] = testing::slurp(e.path());
  }
  return out;
}

// Reports name their inputs by path, so both runs use the same directory.
TEST(Cli, ChainIsByteDeterministicWithProvenance) {
  testing::TempDir a;
  run_chain(a.path());
  const auto sa = snapshot(a.path());
  const auto ra = nlohmann::json::parse(testing::slurp(a / "run.json"));
  fs::remove_all(a.path());
  run_chain(a.path());
  const auto sb = snapshot(a.path());
  const auto rb = nlohmann::json::parse(testing::slurp(a / "run.json"));
  ASSERT_GT(sa.size(), 50u);
  ASSERT_EQ(sa.size(), sb.size());
  for (const auto& [name, bytes] : sa) {
    ASSERT_TRUE(sb.count(name)) << name;
    EXPECT_TRUE(sb.at(name) == bytes) << name;
  }
  for (const char* f : {"pano/cam_a.rgb.png", "pano/cam_a.depth.pfm",
                        "surface/faces.bin", "splits.json", "metrics.json"})
    EXPECT_TRUE(sa.count(f)) << f;
  for (const auto& name : subcommands()) {
    ASSERT_TRUE(ra["stages"].contains(name)) << name;
    const auto& e = ra["stages"][name];
    EXPECT_EQ(e["status"], "ok") << name;
    EXPECT_EQ(e["config_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(e["config_hash"], rb["stages"][name]["config_hash"]);
    EXPECT_TRUE(e.contains("inputs") && e.contains("outputs") && e.contains("versions"));
  }
}

TEST(Cli, ConfigHashFollowsTunables) {
  testing::TempDir d;
  ASSERT_EQ(run("synth --width 128 --height 64 --out " + q(d.path())), 0);
  ASSERT_EQ(run("refine --out " + q(d.path())), 0);
  const auto first = nlohmann::json::parse(testing::slurp(d / "run.json"));
  ASSERT_EQ(run("refine --set refine.simplify_epsilon=1.5 --out " + q(d.path())), 0);
  const auto second = nlohmann::json::parse(testing::slurp(d / "run.json"));
  EXPECT_NE(first["stages"]["refine"]["config_hash"],
            second["stages"]["refine"]["config_hash"]);
  // Earlier stages stay recorded.
  EXPECT_TRUE(second["stages"].contains("synth"));
}

TEST(Cli, MissingRpcSidecarIsValidationError) {
  testing::TempDir d;
  ASSERT_EQ(run("synth --width 128 --height 64 --out " + q(d.path())), 0);
  ASSERT_EQ(run("refine --out " + q(d.path())), 0);
  fs::remove(rpc_sidecar_path(d / "synth/views/view_1.png"));
  EXPECT_EQ(run("fuse --out " + q(d.path())), 1);
  const auto r = nlohmann::json::parse(testing::slurp(d / "run.json"));
  EXPECT_EQ(r["stages"]["fuse"]["status"], "validation_error");
  EXPECT_EQ(r["stages"]["fuse"]["exit_code"], 1);
}

TEST(Cli, IdenticalImagesScorePerfectly) {
  testing::TempDir d;
  ASSERT_EQ(run("synth --width 128 --height 64 --out " + q(d.path())), 0);
  const fs::path sv = d / "synth/streetview";
  ASSERT_EQ(run("metrics --out " + q(d / "m") + " --manifest " + q(sv / "manifest.csv") +
                " --pred-dir " + q(sv)),
            0);
  const auto j = nlohmann::json::parse(testing::slurp(d / "m/metrics.json"));
  ASSERT_EQ(j["pairs"].size(), 3u);
  for (const auto& row : j["pairs"]) {
    EXPECT_EQ(row["psnr"], "+inf");
    EXPECT_EQ(row["ssim"], 1.0);
    EXPECT_EQ(row["ie"], 1.0);
    for (const char* k : {"ib", "ig", "is"})
      if (!row[k].is_null()) EXPECT_EQ(row[k], 1.0) << k;
  }
}

TEST(Cli, ExitCodes) {
  testing::TempDir d;
  // Nothing to refine yet.
  EXPECT_EQ(run("refine --out " + q(d.path())), 1);
  // One 700 m tile holds every camera of the default scene.
  ASSERT_EQ(run("synth --width 128 --height 64 --out " + q(d.path())), 0);
  for (const char* s : {"refine", "fuse", "render --width 128 --height 64", "pair"})
    ASSERT_EQ(run(std::string(s) + " --out " + q(d.path())), 0) << s;
  EXPECT_EQ(run("split --out " + q(d.path())), 2);
  EXPECT_EQ(run("refine --set refine.nonsense=1 --out " + q(d.path())), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("--version"), 0);
}

TEST(Cli, ConfigFile) {
  testing::TempDir d;
  testing::spit(d / "c.toml", "[render]\nwidth = 64\nheight = 32\n");
  ASSERT_EQ(run("synth --width 64 --height 32 --out " + q(d.path())), 0);
  for (const char* s : {"refine", "fuse"})
    ASSERT_EQ(run(std::string(s) + " --out " + q(d.path())), 0) << s;
  ASSERT_EQ(run("render --config " + q(d / "c.toml") + " --out " + q(d.path())), 0);
  const auto cam = nlohmann::json::parse(testing::slurp(d / "pano/cam_a.cam.json"));
  EXPECT_EQ(cam["width"], 64);
  testing::spit(d / "bad.toml", "[render]\nwdith = 64\n");
  EXPECT_EQ(run("render --config " + q(d / "bad.toml") + " --out " + q(d.path())), 1);
}

}  // namespace
}  // namespace crossview
