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

#ifndef CROSSVIEW_CONDITIONING_HPP_
#define CROSSVIEW_CONDITIONING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossview/edges.hpp"
#include "crossview/panorama.hpp"
#include "crossview/raster.hpp"

namespace crossview {

// |A n B| / |A u B| over nonzero pixels; 1.0 when both are empty.
double sky_overlap_ratio(const Raster& pred_sky, const Raster& gt_sky);

struct StreetViewRecord {
  std::filesystem::path path;
  double lat = 0.0;
  double lon = 0.0;
  double heading = 0.0;  // degrees
};

// CSV with header `path,lat,lon,heading_deg`. Relative paths resolve
// against the manifest's directory.
std::vector<StreetViewRecord> read_streetview_manifest(
    const std::filesystem::path& csv);
void write_streetview_manifest(const std::vector<StreetViewRecord>& records,
                               const std::filesystem::path& csv);

// `<image stem>.sky.png` next to the street-view image.
std::filesystem::path gt_sky_path(const std::filesystem::path& image);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split split);

struct ConditionPair {
  std::string bundle_stem;
  std::filesystem::path gt_path;
  double overlap_ratio = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double heading = 0.0;
  std::optional<Split> split;
};

struct PairingLogEntry {
  std::filesystem::path path;
  double ratio = 0.0;
  bool kept = false;
  std::string reason;
};

struct PairingResult {
  std::vector<ConditionPair> pairs;  // kept only
  std::vector<PairingLogEntry> log;  // every candidate
};

struct NamedBundle {
  std::string stem;
  PanoramaBundle bundle;
};

using SkyMaskLoader = std::function<Raster(const StreetViewRecord&)>;

// Reads gt_sky_path(record.path); MissingSkyMask when absent.
Raster load_gt_sky(const StreetViewRecord& record);

inline constexpr double kDefaultPairThreshold = 0.95;
inline constexpr double kMatchToleranceDeg = 1e-7;

// A record matches the bundle rendered at its lat, lon and heading. Pairs
// are kept iff ratio > threshold. Output is sorted, independent of record
// order.
PairingResult pair_dataset(const std::vector<NamedBundle>& bundles,
                           const std::vector<StreetViewRecord>& records,
                           double threshold = kDefaultPairThreshold,
                           const SkyMaskLoader& loader = load_gt_sky);

void write_pairing_report(const PairingResult& result,
                          const std::filesystem::path& jsonl);

struct SplitRatio {
  int train = 8;
  int val = 1;
  int test = 1;
};
SplitRatio parse_split_ratio(const std::string& text);  // "8:1:1"

struct SplitAssignment {
  double tile_m = 700.0;
  std::uint64_t seed = 0;
  std::map<std::string, Split> tiles;  // tile id "col_row" -> split
  std::vector<ConditionPair> pairs;    // with split and tile filled in
  std::vector<std::string> pair_tiles;  // tile id per pair
  double min_test_train_distance = 0.0;  // meters between tile centroids
};

inline constexpr int kSplitCandidates = 100;

// Tiles of tile_m x tile_m meters anchored at the north-west corner of the
// pairs' bounding box. Whole tiles go to one split.
SplitAssignment tile_split(const std::vector<ConditionPair>& pairs,
                           double tile_m = 700.0, std::uint64_t seed = 0,
                           const SplitRatio& ratio = {});

// True when no tile holds pairs from two splits.
bool split_is_leak_free(const SplitAssignment& split);

void write_splits(const SplitAssignment& split, const std::filesystem::path& json);

}  // namespace crossview

#endif  // CROSSVIEW_CONDITIONING_HPP_
