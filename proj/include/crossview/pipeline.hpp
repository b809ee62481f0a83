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

#ifndef CROSSVIEW_PIPELINE_HPP_
#define CROSSVIEW_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "crossview/conditioning.hpp"
#include "crossview/edges.hpp"
#include "crossview/geometry_refine.hpp"
#include "crossview/metrics.hpp"
#include "crossview/texture_fusion.hpp"
#include "json.hpp"

namespace crossview {

inline constexpr const char* kVersion = "0.1.0";

// Every input path and tunable of the batch pipeline. Empty paths fall back
// to the locations the preceding stage writes under `out`.
struct PipelineConfig {
  std::filesystem::path out = "out";
  std::filesystem::path height;
  std::filesystem::path footprint;
  std::vector<std::filesystem::path> views;  // explicit view images
  std::filesystem::path views_dir;           // else every view_<id>.png here
  std::filesystem::path manifest;            // street-view CSV
  std::filesystem::path scene;               // synth input; default scene if empty
  std::filesystem::path edge_dir;            // optional external edge maps
  std::filesystem::path pred_dir;            // synthesized images for metrics

  RefineOptions refine;
  double wall_threshold = 0.0;
  std::uint64_t min_shared_texels = kMinSharedTexels;
  int pano_width = 1024;
  int pano_height = 512;
  double camera_height = 2.5;
  double render_canny_low = kDefaultCannyLow;
  double render_canny_high = kDefaultCannyHigh;
  double condition_canny_low = kDefaultCannyLow;
  double condition_canny_high = kDefaultCannyHigh;
  double pair_threshold = kDefaultPairThreshold;
  double tile_m = 700.0;
  SplitRatio split_ratio;
  std::uint64_t split_seed = 0;
  double metrics_canny_low = kMetricCannyLow;
  double metrics_canny_high = kMetricCannyHigh;
  int workers = 0;  // 0: CROSSVIEW_WORKERS or all cores

  // Resolved defaults.
  std::filesystem::path synth_dir() const { return out / "synth"; }
  std::filesystem::path height_path() const;
  std::filesystem::path footprint_path() const;
  std::filesystem::path manifest_path() const;
  std::filesystem::path refine_dir() const { return out / "refine"; }
  std::filesystem::path surface_dir() const { return out / "surface"; }
  std::filesystem::path pano_dir() const { return out / "pano"; }
  std::filesystem::path condition_dir() const { return out / "condition"; }
  std::filesystem::path pairing_dir() const { return out / "pairing"; }
  std::filesystem::path preview_dir() const { return out / "preview"; }
  std::filesystem::path pred_path() const;
};

// TOML sections [paths] [refine] [fuse] [render] [condition] [pair] [split]
// [metrics] [run]; unknown sections or keys are rejected. Relative paths
// resolve against the file's directory.
void load_config_file(PipelineConfig& config, const std::filesystem::path& toml);

// `section.key=value`, value in TOML syntax (bare strings accepted).
void apply_override(PipelineConfig& config, const std::string& assignment);

std::vector<std::string> config_keys();

// Tunables only; paths and worker count do not enter the hash.
nlohmann::json tunables_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);  // 16 hex digits

std::uint64_t fnv1a64(const std::string& bytes);

const std::vector<std::string>& subcommands();

struct StageResult {
  int exit_code = 0;
  nlohmann::json inputs = nlohmann::json::array();
  nlohmann::json outputs = nlohmann::json::array();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json notes = nlohmann::json::object();
};

// Runs one subcommand. Throws crossview::Error on failure.
StageResult run_stage(const std::string& subcommand, const PipelineConfig& config,
                      std::ostream& log);

// Runs a subcommand, maps errors to exit codes (1 validation, 2 runtime)
// and records the run in `<out>/run.json`.
int run_and_record(const std::string& subcommand, const PipelineConfig& config,
                   std::ostream& log, std::ostream& err);

}  // namespace crossview

#endif  // CROSSVIEW_PIPELINE_HPP_
