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

#include "crossview/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

double sky_overlap_ratio(const Raster& a, const Raster& b) {
  if (a.width() != b.width() || a.height() != b.height() ||
      a.channels() != 1 || b.channels() != 1)
    throw DimMismatch("conditioning.sky_overlap_ratio: masks differ in shape (" +
                      std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                      " vs " + std::to_string(b.width()) + "x" +
                      std::to_string(b.height()) + ")");
  std::uint64_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.value(x, y) != 0.0, pb = b.value(x, y) != 0.0;
      inter += pa && pb;
      uni += pa || pb;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const fs::path& file, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("conditioning: " + file.string() + ":" + std::to_string(line) +
                    ": bad number '" + s + "'");
}

double heading_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

std::vector<StreetViewRecord> read_streetview_manifest(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("conditioning: cannot open manifest " + csv.string());
  std::string line;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"path", "lat", "lon", "heading_deg"})
    throw FormatError("conditioning: " + csv.string() +
                      ": header must be path,lat,lon,heading_deg");
  std::vector<StreetViewRecord> out;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4)
      throw FormatError("conditioning: " + csv.string() + ":" + std::to_string(n) +
                        ": expected 4 columns");
    StreetViewRecord r;
    r.path = cells[0];
    if (r.path.is_relative()) r.path = csv.parent_path() / r.path;
    r.lat = parse_number(cells[1], csv, n);
    r.lon = parse_number(cells[2], csv, n);
    r.heading = parse_number(cells[3], csv, n);
    out.push_back(std::move(r));
  }
  return out;
}

void write_streetview_manifest(const std::vector<StreetViewRecord>& records,
                               const fs::path& csv) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("conditioning: cannot write " + csv.string());
  out << "path,lat,lon,heading_deg\n";
  out.precision(17);
  for (const auto& r : records)
    out << r.path.string() << ',' << r.lat << ',' << r.lon << ',' << r.heading
        << '\n';
}

fs::path gt_sky_path(const fs::path& image) {
  fs::path p = image;
  p.replace_extension(".sky.png");
  return p;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Raster load_gt_sky(const StreetViewRecord& record) {
  const fs::path p = gt_sky_path(record.path);
  if (!fs::exists(p))
    throw MissingSkyMask("conditioning.pair_dataset: no sky mask " + p.string());
  Raster r = read_raster(p, RasterFormat::kPng8);
  if (r.channels() != 1)
    throw FormatError("conditioning.pair_dataset: sky mask must be 1-channel: " +
                      p.string());
  return r;
}

PairingResult pair_dataset(const std::vector<NamedBundle>& bundles,
                           const std::vector<StreetViewRecord>& records,
                           double threshold, const SkyMaskLoader& loader) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ValidationError("conditioning.pair_dataset: threshold must be in [0, 1]");
  std::vector<const NamedBundle*> order;
  for (const auto& b : bundles) order.push_back(&b);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->stem < b->stem; });

  std::vector<StreetViewRecord> sorted = records;
  auto key = [](const StreetViewRecord& r) {
    return std::make_tuple(r.path.string(), r.lat, r.lon, r.heading);
  };
  std::sort(sorted.begin(), sorted.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });

  PairingResult out;
  for (const auto& r : sorted) {
    const NamedBundle* match = nullptr;
    for (const auto* b : order) {
      const PanoCamera& c = b->bundle.camera;
      if (std::abs(c.lat - r.lat) <= kMatchToleranceDeg &&
          std::abs(c.lon - r.lon) <= kMatchToleranceDeg &&
          heading_gap(c.heading, r.heading) <= 1e-6) {
        match = b;
        break;
      }
    }
    PairingLogEntry log;
    log.path = r.path;
    if (!match) {
      log.reason = "no bundle at location";
      out.log.push_back(std::move(log));
      continue;
    }
    const Raster gt = loader(r);
    log.ratio = sky_overlap_ratio(match->bundle.sky_mask, gt);
    log.kept = log.ratio > threshold;
    if (log.kept) {
      log.reason = "kept";
      ConditionPair p;
      p.bundle_stem = match->stem;
      p.gt_path = r.path;
      p.overlap_ratio = log.ratio;
      p.lat = r.lat;
      p.lon = r.lon;
      p.heading = r.heading;
      out.pairs.push_back(std::move(p));
    } else {
      std::ostringstream why;
      why << "sky overlap " << log.ratio << " not above " << threshold;
      log.reason = why.str();
    }
    out.log.push_back(std::move(log));
  }
  return out;
}

void write_pairing_report(const PairingResult& result, const fs::path& jsonl) {
  std::ofstream out(jsonl, std::ios::trunc);
  if (!out) throw IoError("conditioning: cannot write " + jsonl.string());
  for (const auto& e : result.log) {
    nlohmann::ordered_json j;
    j["path"] = e.path.string();
    j["ratio"] = e.ratio;
    j["kept"] = e.kept;
    j["reason"] = e.reason;
    out << j.dump() << '\n';
  }
}

SplitRatio parse_split_ratio(const std::string& text) {
  SplitRatio r;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> r.train >> c1 >> r.val >> c2 >> r.test) || c1 != ':' || c2 != ':' ||
      !in.eof() || r.train < 1 || r.val < 1 || r.test < 1)
    throw ValidationError("conditioning.tile_split: ratio must look like 8:1:1, got '" +
                          text + "'");
  return r;
}

SplitAssignment tile_split(const std::vector<ConditionPair>& pairs, double tile_m,
                           std::uint64_t seed, const SplitRatio& ratio) {
  if (!(tile_m > 0.0))
    throw ValidationError("conditioning.tile_split: tile_m must be > 0");
  if (ratio.train < 1 || ratio.val < 1 || ratio.test < 1)
    throw ValidationError("conditioning.tile_split: ratio parts must be >= 1");
  SplitAssignment out;
  out.tile_m = tile_m;
  out.seed = seed;
  out.pairs = pairs;
  if (pairs.empty())
    throw InsufficientTiles("conditioning.tile_split: no pairs");

  double lat_max = -std::numeric_limits<double>::infinity();
  double lon_min = std::numeric_limits<double>::infinity();
  double lat_sum = 0.0;
  for (const auto& p : pairs) {
    lat_max = std::max(lat_max, p.lat);
    lon_min = std::min(lon_min, p.lon);
    lat_sum += p.lat;
  }
  const MetersPerDegree mpd = meters_per_degree(lat_sum / pairs.size());

  struct Tile {
    double e = 0.0, s = 0.0;
    int n = 0;
  };
  std::map<std::string, Tile> tiles;
  for (const auto& p : pairs) {
    const double e = (p.lon - lon_min) * mpd.lon;
    const double s = (lat_max - p.lat) * mpd.lat;
    const std::string id =
        std::to_string(static_cast<long long>(std::floor(e / tile_m))) + "_" +
        std::to_string(static_cast<long long>(std::floor(s / tile_m)));
    out.pair_tiles.push_back(id);
    Tile& t = tiles[id];
    t.e += e;
    t.s += s;
    ++t.n;
  }
  const int n = static_cast<int>(tiles.size());
  if (n < 3)
    throw InsufficientTiles("conditioning.tile_split: " + std::to_string(n) +
                            " tile(s); need at least 3");

  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> centroid;
  for (const auto& [id, t] : tiles) {
    ids.push_back(id);
    centroid.emplace_back(t.e / t.n, t.s / t.n);
  }
  const int sum = ratio.train + ratio.val + ratio.test;
  int n_val = std::max(1, static_cast<int>(std::lround(double(n) * ratio.val / sum)));
  int n_test = std::max(1, static_cast<int>(std::lround(double(n) * ratio.test / sum)));
  while (n - n_val - n_test < 1) (n_val > n_test ? n_val : n_test) -= 1;

  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_score = -1.0;
  for (int k = 0; k < kSplitCandidates; ++k) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
    double score = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_test; ++a)
      for (int b = n_test + n_val; b < n; ++b) {
        const auto& p = centroid[perm[a]];
        const auto& q = centroid[perm[b]];
        score = std::min(score, std::hypot(p.first - q.first, p.second - q.second));
      }
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  }
  out.min_test_train_distance = best_score;
  for (int i = 0; i < n; ++i) {
    const Split s = i < n_test ? Split::kTest
                               : (i < n_test + n_val ? Split::kVal : Split::kTrain);
    out.tiles[ids[best[i]]] = s;
  }
  for (std::size_t i = 0; i < out.pairs.size(); ++i)
    out.pairs[i].split = out.tiles.at(out.pair_tiles[i]);
  return out;
}

bool split_is_leak_free(const SplitAssignment& split) {
  std::map<std::string, std::set<Split>> seen;
  for (std::size_t i = 0; i < split.pairs.size(); ++i) {
    if (!split.pairs[i].split) return false;
    seen[split.pair_tiles[i]].insert(*split.pairs[i].split);
  }
  for (const auto& [id, s] : seen)
    if (s.size() != 1) return false;
  return true;
}

void write_splits(const SplitAssignment& split, const fs::path& json) {
  nlohmann::ordered_json j;
  j["tile_m"] = split.tile_m;
  j["seed"] = split.seed;
  j["min_test_train_distance_m"] = split.min_test_train_distance;
  nlohmann::ordered_json tiles = nlohmann::ordered_json::object();
  for (const auto& [id, s] : split.tiles) tiles[id] = split_name(s);
  j["tiles"] = tiles;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < split.pairs.size(); ++i) {
      const auto& p = split.pairs[i];
      if (p.split != s) continue;
      arr.push_back({{"bundle", p.bundle_stem},
                     {"gt", p.gt_path.string()},
                     {"tile", split.pair_tiles[i]},
                     {"ratio", p.overlap_ratio}});
    }
    j[split_name(s)] = arr;
  }
  std::ofstream out(json, std::ios::trunc);
  if (!out) throw IoError("conditioning: cannot write " + json.string());
  out << j.dump(2) << '\n';
}

}  // namespace crossview
