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

// crossview: batch entry point for the satellite-to-ground pipeline.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crossview/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  std::optional<double> threshold;
  std::optional<double> tile_m;
  std::optional<std::string> ratio;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scene;
  std::optional<std::string> pred_dir;
  std::optional<std::string> edge_dir;
  std::optional<std::string> manifest;
  std::optional<int> width;
  std::optional<int> height;
};

crossview::PipelineConfig build_config(const Flags& f) {
  crossview::PipelineConfig c;
  if (!f.config.empty()) crossview::load_config_file(c, f.config);
  for (const auto& o : f.overrides) crossview::apply_override(c, o);
  if (!f.out.empty()) c.out = f.out;
  if (f.workers) c.workers = *f.workers;
  if (f.threshold) c.pair_threshold = *f.threshold;
  if (f.tile_m) c.tile_m = *f.tile_m;
  if (f.ratio) c.split_ratio = crossview::parse_split_ratio(*f.ratio);
  if (f.seed) c.split_seed = *f.seed;
  if (f.scene) c.scene = *f.scene;
  if (f.pred_dir) c.pred_dir = *f.pred_dir;
  if (f.edge_dir) c.edge_dir = *f.edge_dir;
  if (f.manifest) c.manifest = *f.manifest;
  if (f.width) c.pano_width = *f.width;
  if (f.height) c.pano_height = *f.height;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite-to-ground panorama condition pipeline"};
  app.set_version_flag("--version", crossview::kVersion);
  app.require_subcommand(1);
  Flags flags;

  const std::map<std::string, std::string> help = {
      {"synth", "Generate a synthetic scene with exact ground truth"},
      {"refine", "Regularize footprints, fit the ground plane, refine heights"},
      {"fuse", "Texture the refined surface from the satellite views"},
      {"render", "Render ground-level panoramas at the street-view locations"},
      {"condition", "Assemble texture and edge condition bundles"},
      {"pair", "Pair panoramas with street-view images by sky overlap"},
      {"split", "Assign pairs to train/val/test by spatial tile"},
      {"metrics", "Evaluate synthesized panoramas against ground truth"},
      {"preview", "Write condition | edge | depth montages"},
  };
  for (const auto& name : crossview::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", flags.config, "TOML configuration file");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--set", flags.overrides, "Override a config key (section.key=value)");
    sub->add_option("--workers", flags.workers, "Worker threads")->check(CLI::NonNegativeNumber);
    sub->add_option("--manifest", flags.manifest, "Street-view manifest CSV");
    if (name == "synth") sub->add_option("--scene", flags.scene, "Scene spec JSON");
    if (name == "synth" || name == "render") {
      sub->add_option("--width", flags.width, "Panorama width");
      sub->add_option("--height", flags.height, "Panorama height");
    }
    if (name == "condition") sub->add_option("--edge-dir", flags.edge_dir, "External edge maps");
    if (name == "pair") sub->add_option("--threshold", flags.threshold, "Sky overlap threshold");
    if (name == "split") {
      sub->add_option("--tile-m", flags.tile_m, "Tile size in meters");
      sub->add_option("--ratio", flags.ratio, "train:val:test tile ratio");
      sub->add_option("--seed", flags.seed, "Shuffle seed");
    }
    if (name == "metrics") sub->add_option("--pred-dir", flags.pred_dir, "Synthesized images");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  crossview::PipelineConfig config;
  try {
    config = build_config(flags);
  } catch (const crossview::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return crossview::run_and_record(sub, config, std::cout, std::cerr);
}
