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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "crossview/conditioning.hpp"
#include "crossview/error.hpp"
#include "test_util.hpp"

namespace crossview {
namespace {

Raster mask_with(int n_on, int w = 20, int h = 10, int first = 0) {
  Raster m = Raster::u8(w, h, 1);
  for (int i = first; i < first + n_on; ++i) m.u8_data()[i] = 1;
  return m;
}

TEST(SkyOverlap, Examples) {
  const Raster a = mask_with(100, 20, 10);
  EXPECT_DOUBLE_EQ(sky_overlap_ratio(a, a), 1.0);
  EXPECT_DOUBLE_EQ(sky_overlap_ratio(mask_with(50, 20, 10, 0), mask_with(50, 20, 10, 50)), 0.0);
  // B = first 50 of A plus 50 new pixels.
  const Raster b = mask_with(100, 20, 10, 50);
  EXPECT_NEAR(sky_overlap_ratio(a, b), 50.0 / 150.0, 1e-15);
  EXPECT_DOUBLE_EQ(sky_overlap_ratio(Raster::u8(4, 4, 1), Raster::u8(4, 4, 1)), 1.0);
  EXPECT_THROW(sky_overlap_ratio(a, Raster::u8(10, 10, 1)), DimMismatch);
}

TEST(SkyOverlap, MatchesSetCounting) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Raster a = Raster::u8(17, 9, 1), b = Raster::u8(17, 9, 1);
    std::set<int> sa, sb;
    for (int i = 0; i < 17 * 9; ++i) {
      if (rng() % 3 == 0) a.u8_data()[i] = 1, sa.insert(i);
      if (rng() % 2 == 0) b.u8_data()[i] = 255, sb.insert(i);
    }
    std::set<int> both, any = sa;
    std::ranges::set_intersection(sa, sb, std::inserter(both, both.end()));
    any.insert(sb.begin(), sb.end());
    EXPECT_DOUBLE_EQ(sky_overlap_ratio(a, b), double(both.size()) / double(any.size()));
  }
}

// A bundle whose sky mask is the first 100 pixels, at a given location.
NamedBundle bundle_at(const std::string& stem, double lat, double lon,
                      double heading) {
  NamedBundle nb;
  nb.stem = stem;
  PanoramaBundle& b = nb.bundle;
  b.camera.lat = lat;
  b.camera.lon = lon;
  b.camera.heading = heading;
  b.camera.width = 20;
  b.camera.height = 10;
  b.sky_mask = mask_with(100);
  return nb;
}

// Ground-truth masks keyed by path: `keep` of the bundle's 100 sky pixels.
SkyMaskLoader loader_keeping(std::map<std::string, int> keep) {
  return [keep](const StreetViewRecord& r) {
    const auto it = keep.find(r.path.string());
    if (it == keep.end()) throw MissingSkyMask("no mask for " + r.path.string());
    return mask_with(it->second);
  };
}

TEST(PairDataset, StrictThreshold) {
  const std::vector<NamedBundle> bundles = {bundle_at("a", 22.3, 114.1, 0.0),
                                            bundle_at("b", 22.4, 114.1, 90.0)};
  const std::vector<StreetViewRecord> records = {{"a.png", 22.3, 114.1, 0.0},
                                                 {"b.png", 22.4, 114.1, 90.0}};
  // 96 / 100 = 0.96 kept; 95 / 100 = 0.95 exactly is not above 0.95.
  const PairingResult r =
      pair_dataset(bundles, records, 0.95, loader_keeping({{"a.png", 96}, {"b.png", 95}}));
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].bundle_stem, "a");
  EXPECT_DOUBLE_EQ(r.pairs[0].overlap_ratio, 0.96);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_DOUBLE_EQ(r.log[1].ratio, 0.95);
  EXPECT_FALSE(r.log[1].kept);
  EXPECT_FALSE(r.log[1].reason.empty());
}

TEST(PairDataset, NoBundleIsLoggedNotThrown) {
  const std::vector<NamedBundle> bundles = {bundle_at("a", 22.3, 114.1, 0.0)};
  // Same place, other heading; and another place.
  const std::vector<StreetViewRecord> records = {{"x.png", 22.3, 114.1, 45.0},
                                                 {"y.png", 22.5, 114.1, 0.0}};
  const PairingResult r = pair_dataset(bundles, records, 0.95, loader_keeping({}));
  EXPECT_TRUE(r.pairs.empty());
  ASSERT_EQ(r.log.size(), 2u);
  for (const auto& e : r.log) {
    EXPECT_FALSE(e.kept);
    EXPECT_EQ(e.reason, "no bundle at location");
  }
}

TEST(PairDataset, HeadingMatchesModulo360) {
  const std::vector<NamedBundle> bundles = {bundle_at("a", 22.3, 114.1, 0.0)};
  const PairingResult r = pair_dataset(bundles, {{"a.png", 22.3, 114.1, 360.0}}, 0.95,
                                       loader_keeping({{"a.png", 100}}));
  EXPECT_EQ(r.pairs.size(), 1u);
}

TEST(PairDataset, MissingSkyMask) {
  testing::TempDir dir;
  const std::vector<NamedBundle> bundles = {bundle_at("a", 22.3, 114.1, 0.0)};
  const std::vector<StreetViewRecord> records = {
      {dir / "a.png", 22.3, 114.1, 0.0}};
  EXPECT_THROW(pair_dataset(bundles, records), MissingSkyMask);
  // The default loader reads the sidecar next to the image.
  write_raster(mask_with(100), gt_sky_path(dir / "a.png"));
  EXPECT_EQ(pair_dataset(bundles, records).pairs.size(), 1u);
}

TEST(PairDataset, InvariantToRecordOrder) {
  std::vector<NamedBundle> bundles;
  std::vector<StreetViewRecord> records;
  std::map<std::string, int> keep;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 12; ++i) {
    const double lat = 22.3 + 0.001 * i;
    bundles.push_back(bundle_at("p" + std::to_string(i), lat, 114.1, 30.0 * i));
    const std::string path = "g" + std::to_string(i) + ".png";
    records.push_back({path, lat, 114.1, 30.0 * i});
    keep[path] = 90 + static_cast<int>(rng() % 11);
  }
  const PairingResult a = pair_dataset(bundles, records, 0.95, loader_keeping(keep));
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(records.begin(), records.end(), rng);
    std::shuffle(bundles.begin(), bundles.end(), rng);
    const PairingResult b = pair_dataset(bundles, records, 0.95, loader_keeping(keep));
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      EXPECT_EQ(a.pairs[i].bundle_stem, b.pairs[i].bundle_stem);
      EXPECT_EQ(a.pairs[i].gt_path, b.pairs[i].gt_path);
      EXPECT_EQ(a.pairs[i].overlap_ratio, b.pairs[i].overlap_ratio);
    }
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].path, b.log[i].path);
  }
}

TEST(PairDataset, ReportIsJsonl) {
  testing::TempDir dir;
  const PairingResult r =
      pair_dataset({bundle_at("a", 22.3, 114.1, 0.0)},
                   {{"a.png", 22.3, 114.1, 0.0}, {"z.png", 1.0, 2.0, 0.0}}, 0.95,
                   loader_keeping({{"a.png", 97}}));
  write_pairing_report(r, dir / "pairs.jsonl");
  std::ifstream in(dir / "pairs.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("path") && j.contains("ratio") && j.contains("kept") &&
                j.contains("reason"));
    ++n;
  }
  EXPECT_EQ(n, 2);
}

// Pairs on a grid of 700 m tiles, `per_tile` pairs each, well inside.
std::vector<ConditionPair> grid_pairs(int cols, int rows, int per_tile = 3) {
  const double lat0 = 22.3, lon0 = 114.1;
  const MetersPerDegree mpd = meters_per_degree(lat0);
  std::vector<ConditionPair> out;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < per_tile; ++k) {
        ConditionPair p;
        // The very first pair anchors the tiling; the rest sit 50 m clear
        // of tile borders.
        const double pad = (c == 0 && r == 0 && k == 0) ? 0.0 : 50.0;
        const double e = 700.0 * c + 100.0 * k + pad;
        const double s = 700.0 * r + 150.0 * k + pad;
        p.lat = lat0 - s / mpd.lat;
        p.lon = lon0 + e / mpd.lon;
        p.bundle_stem = "b_" + std::to_string(c) + "_" + std::to_string(r) + "_" +
                        std::to_string(k);
        p.gt_path = p.bundle_stem + ".png";
        out.push_back(p);
      }
  return out;
}

int tiles_in(const SplitAssignment& s, Split which) {
  return static_cast<int>(std::ranges::count_if(
      s.tiles, [&](const auto& kv) { return kv.second == which; }));
}

TEST(TileSplit, TenTilesGiveEightOneOne) {
  const SplitAssignment s = tile_split(grid_pairs(5, 2), 700.0, 42);
  ASSERT_EQ(s.tiles.size(), 10u);
  EXPECT_EQ(tiles_in(s, Split::kTrain), 8);
  EXPECT_EQ(tiles_in(s, Split::kVal), 1);
  EXPECT_EQ(tiles_in(s, Split::kTest), 1);
  EXPECT_TRUE(split_is_leak_free(s));
}

TEST(TileSplit, NoLeakageAndEveryPairAssigned) {
  for (std::uint64_t seed : {0u, 1u, 9u}) {
    const SplitAssignment s = tile_split(grid_pairs(4, 4, 5), 700.0, seed);
    ASSERT_EQ(s.pairs.size(), 80u);
    std::map<std::string, Split> seen;
    for (std::size_t i = 0; i < s.pairs.size(); ++i) {
      ASSERT_TRUE(s.pairs[i].split);
      const auto [it, fresh] = seen.emplace(s.pair_tiles[i], *s.pairs[i].split);
      EXPECT_EQ(it->second, *s.pairs[i].split) << s.pair_tiles[i];
      EXPECT_EQ(s.tiles.at(s.pair_tiles[i]), *s.pairs[i].split);
    }
    EXPECT_TRUE(split_is_leak_free(s));
  }
}

TEST(TileSplit, LeakDetected) {
  SplitAssignment s = tile_split(grid_pairs(5, 2), 700.0, 1);
  for (std::size_t i = 0; i < s.pairs.size(); ++i)
    if (s.pair_tiles[i] == s.pair_tiles[0] && i > 0) {
      s.pairs[i].split = *s.pairs[0].split == Split::kTrain ? Split::kTest : Split::kTrain;
      break;
    }
  EXPECT_FALSE(split_is_leak_free(s));
}

TEST(TileSplit, DeterministicUnderSeed) {
  const auto pairs = grid_pairs(5, 4);
  const SplitAssignment a = tile_split(pairs, 700.0, 77);
  const SplitAssignment b = tile_split(pairs, 700.0, 77);
  ASSERT_EQ(a.tiles.size(), 20u);
  EXPECT_EQ(a.tiles, b.tiles);
  EXPECT_EQ(a.min_test_train_distance, b.min_test_train_distance);
  // Some seed picks a different assignment.
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 20 && !differs; ++seed)
    differs = tile_split(pairs, 700.0, seed).tiles != a.tiles;
  EXPECT_TRUE(differs);
}

TEST(TileSplit, ReportedDistanceMatchesAssignment) {
  const auto pairs = grid_pairs(10, 1);
  const SplitAssignment s = tile_split(pairs, 700.0, 5);
  // Tile centroids from the pairs, in meters from the first pair.
  const MetersPerDegree mpd = meters_per_degree(22.3);
  std::map<std::string, std::pair<double, double>> sum;
  std::map<std::string, int> count;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& c = sum[s.pair_tiles[i]];
    c.first += (pairs[i].lon - pairs[0].lon) * mpd.lon;
    c.second += (pairs[0].lat - pairs[i].lat) * mpd.lat;
    ++count[s.pair_tiles[i]];
  }
  double best = 1e300;
  for (const auto& [a, sa] : s.tiles)
    for (const auto& [b, sb] : s.tiles) {
      if (sa != Split::kTest || sb != Split::kTrain) continue;
      const double de = sum[a].first / count[a] - sum[b].first / count[b];
      const double dn = sum[a].second / count[a] - sum[b].second / count[b];
      best = std::min(best, std::hypot(de, dn));
    }
  EXPECT_NEAR(s.min_test_train_distance, best, 1.0);
}

TEST(TileSplit, FewTiles) {
  EXPECT_THROW(tile_split(grid_pairs(1, 1), 700.0, 0), InsufficientTiles);
  EXPECT_THROW(tile_split(grid_pairs(2, 1), 700.0, 0), InsufficientTiles);
  EXPECT_THROW(tile_split({}, 700.0, 0), InsufficientTiles);
  const SplitAssignment s = tile_split(grid_pairs(3, 1), 700.0, 0);
  EXPECT_EQ(tiles_in(s, Split::kTrain), 1);
  EXPECT_EQ(tiles_in(s, Split::kVal), 1);
  EXPECT_EQ(tiles_in(s, Split::kTest), 1);
}

TEST(TileSplit, RatioParsing) {
  const SplitRatio r = parse_split_ratio("7:2:1");
  EXPECT_EQ(r.train, 7);
  EXPECT_EQ(r.val, 2);
  EXPECT_EQ(r.test, 1);
  EXPECT_THROW(parse_split_ratio("8:1"), ValidationError);
  EXPECT_THROW(parse_split_ratio("8:0:1"), ValidationError);
}

TEST(TileSplit, SplitsJson) {
  testing::TempDir dir;
  const SplitAssignment s = tile_split(grid_pairs(5, 2), 700.0, 3);
  write_splits(s, dir / "splits.json");
  const auto j = nlohmann::json::parse(testing::slurp(dir / "splits.json"));
  EXPECT_EQ(j.at("tiles").size(), 10u);
  EXPECT_EQ(j.at("train").size() + j.at("val").size() + j.at("test").size(), 30u);
}

TEST(StreetViewManifest, RoundTripAndErrors) {
  testing::TempDir dir;
  const std::vector<StreetViewRecord> recs = {{"a.png", 22.25, 114.125, 90.0},
                                              {"sub/b.png", -1.5, 2.0, 359.5}};
  write_streetview_manifest(recs, dir / "m.csv");
  const auto back = read_streetview_manifest(dir / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].path, dir / "a.png");
  EXPECT_EQ(back[1].path, dir / "sub/b.png");
  EXPECT_EQ(back[1].lat, -1.5);
  EXPECT_EQ(back[1].heading, 359.5);

  testing::spit(dir / "bad.csv", "file,lat,lon\na.png,1,2\n");
  EXPECT_THROW(read_streetview_manifest(dir / "bad.csv"), FormatError);
  testing::spit(dir / "bad2.csv", "path,lat,lon,heading_deg\na.png,1,x,0\n");
  EXPECT_THROW(read_streetview_manifest(dir / "bad2.csv"), FormatError);
  EXPECT_THROW(read_streetview_manifest(dir / "none.csv"), IoError);
}

}  // namespace
}  // namespace crossview
