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

#include "crossview/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <png.h>

#include "crossview/panorama.hpp"
#include "crossview/parallel.hpp"
#include "crossview/surface.hpp"
#include "crossview/synth_scene.hpp"
#include "crossview/texture_fusion.hpp"
#include "toml.hpp"

namespace crossview {

namespace fs = std::filesystem;

fs::path PipelineConfig::height_path() const {
  return height.empty() ? synth_dir() / "height.pfm" : height;
}
fs::path PipelineConfig::footprint_path() const {
  return footprint.empty() ? synth_dir() / "footprint.png" : footprint;
}
fs::path PipelineConfig::manifest_path() const {
  return manifest.empty() ? synth_dir() / "streetview" / "manifest.csv" : manifest;
}
fs::path PipelineConfig::pred_path() const {
  return pred_dir.empty() ? pano_dir() : pred_dir;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

using Setter = std::function<void(PipelineConfig&, const toml::node&, const fs::path&)>;

[[noreturn]] void bad_value(const std::string& key, const char* expected) {
  throw ValidationError("cli.config: '" + key + "' expects " + expected);
}

double get_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  bad_value(key, "a number");
}

std::int64_t get_int(const toml::node& n, const std::string& key) {
  if (n.is_integer()) return *n.value<std::int64_t>();
  bad_value(key, "an integer");
}

std::string get_string(const toml::node& n, const std::string& key) {
  if (auto v = n.value<std::string>()) return *v;
  bad_value(key, "a string");
}

fs::path get_path(const toml::node& n, const std::string& key, const fs::path& base) {
  fs::path p = get_string(n, key);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path = [&](const std::string& key, fs::path PipelineConfig::*field) {
      t[key] = [key, field](PipelineConfig& c, const toml::node& n, const fs::path& b) {
        c.*field = get_path(n, key, b);
      };
    };
    auto real = [&](const std::string& key, std::function<double&(PipelineConfig&)> f) {
      t[key] = [key, f](PipelineConfig& c, const toml::node& n, const fs::path&) {
        f(c) = get_double(n, key);
      };
    };
    auto integer = [&](const std::string& key,
                       std::function<void(PipelineConfig&, std::int64_t)> f) {
      t[key] = [key, f](PipelineConfig& c, const toml::node& n, const fs::path&) {
        f(c, get_int(n, key));
      };
    };
    path("paths.out", &PipelineConfig::out);
    path("paths.height", &PipelineConfig::height);
    path("paths.footprint", &PipelineConfig::footprint);
    path("paths.views_dir", &PipelineConfig::views_dir);
    path("paths.manifest", &PipelineConfig::manifest);
    path("paths.scene", &PipelineConfig::scene);
    path("paths.edge_dir", &PipelineConfig::edge_dir);
    path("paths.pred_dir", &PipelineConfig::pred_dir);
    t["paths.views"] = [](PipelineConfig& c, const toml::node& n, const fs::path& b) {
      const toml::array* arr = n.as_array();
      if (!arr) bad_value("paths.views", "an array of paths");
      c.views.clear();
      for (const auto& item : *arr) c.views.push_back(get_path(item, "paths.views", b));
    };
    real("refine.simplify_epsilon", [](PipelineConfig& c) -> double& {
      return c.refine.simplify_epsilon;
    });
    integer("refine.min_component_pixels", [](PipelineConfig& c, std::int64_t v) {
      c.refine.min_component_pixels = static_cast<int>(v);
    });
    real("refine.angle_step_deg", [](PipelineConfig& c) -> double& {
      return c.refine.regularize.angle_step_deg;
    });
    real("refine.angle_window_deg", [](PipelineConfig& c) -> double& {
      return c.refine.regularize.angle_window_deg;
    });
    real("refine.max_area_change", [](PipelineConfig& c) -> double& {
      return c.refine.regularize.max_area_change;
    });
    real("refine.ransac_threshold", [](PipelineConfig& c) -> double& {
      return c.refine.ransac.inlier_threshold;
    });
    integer("refine.ransac_iterations", [](PipelineConfig& c, std::int64_t v) {
      c.refine.ransac.iterations = static_cast<int>(v);
    });
    integer("refine.ransac_seed", [](PipelineConfig& c, std::int64_t v) {
      c.refine.ransac.seed = static_cast<std::uint64_t>(v);
    });
    integer("refine.ransac_min_samples", [](PipelineConfig& c, std::int64_t v) {
      c.refine.ransac.min_samples = static_cast<std::size_t>(v);
    });
    real("fuse.wall_threshold", [](PipelineConfig& c) -> double& { return c.wall_threshold; });
    integer("fuse.min_shared_texels", [](PipelineConfig& c, std::int64_t v) {
      c.min_shared_texels = static_cast<std::uint64_t>(v);
    });
    integer("render.width", [](PipelineConfig& c, std::int64_t v) {
      c.pano_width = static_cast<int>(v);
    });
    integer("render.height", [](PipelineConfig& c, std::int64_t v) {
      c.pano_height = static_cast<int>(v);
    });
    real("render.camera_height", [](PipelineConfig& c) -> double& { return c.camera_height; });
    real("render.canny_low", [](PipelineConfig& c) -> double& { return c.render_canny_low; });
    real("render.canny_high", [](PipelineConfig& c) -> double& { return c.render_canny_high; });
    real("condition.canny_low",
         [](PipelineConfig& c) -> double& { return c.condition_canny_low; });
    real("condition.canny_high",
         [](PipelineConfig& c) -> double& { return c.condition_canny_high; });
    real("pair.threshold", [](PipelineConfig& c) -> double& { return c.pair_threshold; });
    real("split.tile_m", [](PipelineConfig& c) -> double& { return c.tile_m; });
    t["split.ratio"] = [](PipelineConfig& c, const toml::node& n, const fs::path&) {
      c.split_ratio = parse_split_ratio(get_string(n, "split.ratio"));
    };
    integer("split.seed", [](PipelineConfig& c, std::int64_t v) {
      c.split_seed = static_cast<std::uint64_t>(v);
    });
    real("metrics.canny_low", [](PipelineConfig& c) -> double& { return c.metrics_canny_low; });
    real("metrics.canny_high",
         [](PipelineConfig& c) -> double& { return c.metrics_canny_high; });
    integer("run.workers", [](PipelineConfig& c, std::int64_t v) {
      if (v < 0) bad_value("run.workers", "a non-negative integer");
      c.workers = static_cast<int>(v);
    });
    return t;
  }();
  return table;
}

void set_key(PipelineConfig& c, const std::string& key, const toml::node& value,
             const fs::path& base) {
  const auto it = setters().find(key);
  if (it == setters().end())
    throw ValidationError("cli.config: unknown key '" + key + "'");
  it->second(c, value, base);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

void load_config_file(PipelineConfig& c, const fs::path& path) {
  if (!fs::exists(path))
    throw IoError("cli.config: config file not found: " + path.string());
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "cli.config: " << path.string() << ": " << e.description() << " at line "
        << e.source().begin.line;
    throw FormatError(msg.str());
  }
  const fs::path base = path.parent_path();
  for (auto&& [section, node] : root) {
    const toml::table* tbl = node.as_table();
    if (!tbl)
      throw ValidationError("cli.config: top-level key '" + std::string(section.str()) +
                            "' must be a section");
    for (auto&& [key, value] : *tbl)
      set_key(c, std::string(section.str()) + "." + std::string(key.str()), value, base);
  }
}

void apply_override(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("cli.config: override must be key=value, got '" + assignment +
                          "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + text);
  } catch (const toml::parse_error&) {
    parsed = toml::table{{"v", text}};
  }
  set_key(c, key, *parsed.get("v"), {});
}

nlohmann::json tunables_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["refine"] = {{"simplify_epsilon", c.refine.simplify_epsilon},
                 {"min_component_pixels", c.refine.min_component_pixels},
                 {"angle_step_deg", c.refine.regularize.angle_step_deg},
                 {"angle_window_deg", c.refine.regularize.angle_window_deg},
                 {"max_area_change", c.refine.regularize.max_area_change},
                 {"ransac_threshold", c.refine.ransac.inlier_threshold},
                 {"ransac_iterations", c.refine.ransac.iterations},
                 {"ransac_seed", c.refine.ransac.seed},
                 {"ransac_min_samples", c.refine.ransac.min_samples}};
  j["fuse"] = {{"wall_threshold", c.wall_threshold},
               {"min_shared_texels", c.min_shared_texels}};
  j["render"] = {{"width", c.pano_width},
                 {"height", c.pano_height},
                 {"camera_height", c.camera_height},
                 {"canny_low", c.render_canny_low},
                 {"canny_high", c.render_canny_high}};
  j["condition"] = {{"canny_low", c.condition_canny_low},
                    {"canny_high", c.condition_canny_high}};
  j["pair"] = {{"threshold", c.pair_threshold}};
  j["split"] = {{"tile_m", c.tile_m},
                {"ratio", std::to_string(c.split_ratio.train) + ":" +
                              std::to_string(c.split_ratio.val) + ":" +
                              std::to_string(c.split_ratio.test)},
                {"seed", c.split_seed}};
  j["metrics"] = {{"canny_low", c.metrics_canny_low},
                  {"canny_high", c.metrics_canny_high}};
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const PipelineConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(tunables_json(c).dump())));
  return buf;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "refine", "fuse", "render", "condition", "pair", "split", "metrics", "synth", "preview"};
  return names;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw IoError(std::string("cli: missing ") + what + ": " + p.string());
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cli: cannot create " + p.string() + ": " + ec.message());
}

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void note_input(StageResult& r, const fs::path& p) {
  r.inputs.push_back({{"path", p.generic_string()}, {"fnv1a64", file_digest(p)}});
}

void note_output(StageResult& r, const fs::path& p) {
  r.outputs.push_back(p.generic_string());
}

void write_json(const nlohmann::ordered_json& j, const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cli: cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::vector<SatelliteView> load_views(const PipelineConfig& c, StageResult& r) {
  std::vector<std::pair<int, fs::path>> paths;
  const std::regex pattern(R"(view_(\d+)\.png)");
  if (!c.views.empty()) {
    for (std::size_t i = 0; i < c.views.size(); ++i) {
      std::smatch m;
      const std::string name = c.views[i].filename().string();
      const int id = std::regex_match(name, m, pattern) ? std::stoi(m[1])
                                                         : static_cast<int>(i);
      paths.emplace_back(id, c.views[i]);
    }
  } else {
    const fs::path dir = c.views_dir.empty() ? c.synth_dir() / "views" : c.views_dir;
    if (!fs::is_directory(dir)) throw IoError("cli: views directory not found: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (std::regex_match(name, m, pattern)) paths.emplace_back(std::stoi(m[1]), e.path());
    }
  }
  if (paths.empty()) throw ValidationError("cli.fuse: no satellite views found");
  std::sort(paths.begin(), paths.end());
  std::vector<SatelliteView> views;
  for (const auto& [id, p] : paths) {
    require_file(p, "view image");
    require_file(rpc_sidecar_path(p), "RPC sidecar");
    views.push_back(read_view(p, id));
    note_input(r, p);
    note_input(r, rpc_sidecar_path(p));
  }
  return views;
}

std::vector<std::string> bundle_stems(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("cli: panorama directory not found: " + dir.string());
  std::vector<std::string> stems;
  const std::string suffix = ".cam.json";
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      stems.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw ValidationError("cli: no panorama bundles in " + dir.string());
  return stems;
}

StageResult stage_synth(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  SceneSpec spec = default_scene();
  if (!c.scene.empty()) {
    require_file(c.scene, "scene spec");
    spec = read_scene(c.scene);
    note_input(r, c.scene);
  }
  spec.pano_width = c.pano_width;
  spec.pano_height = c.pano_height;
  const SyntheticScene scene = generate(spec);
  const fs::path dir = c.synth_dir();
  make_dir(dir / "views");
  make_dir(dir / "streetview");
  write_scene(spec, dir / "scene.json");
  write_heightfield(scene.height, dir / "height.pfm");
  write_footprint(scene.footprint, dir / "footprint.png");
  note_output(r, dir / "scene.json");
  note_output(r, dir / "height.pfm");
  note_output(r, dir / "footprint.png");
  for (const auto& v : scene.views) {
    const fs::path p = dir / "views" / ("view_" + std::to_string(v.id) + ".png");
    write_view(v, p);
    note_output(r, p);
  }
  std::vector<StreetViewRecord> records;
  for (const auto& cam : spec.cameras) {
    PanoCamera pc = scene_camera(spec, cam);
    pc.height_above_ground = c.camera_height;
    const PanoramaBundle b = oracle_panorama(spec, pc);
    const fs::path img = dir / "streetview" / (cam.name + ".png");
    write_raster(b.rgb, img);
    write_raster(b.sky_mask, gt_sky_path(img));
    fs::path sem = img;
    sem.replace_extension(".sem.png");
    write_raster(b.semantic, sem);
    note_output(r, img);
    records.push_back({cam.name + ".png", pc.lat, pc.lon, pc.heading});
  }
  write_streetview_manifest(records, dir / "streetview" / "manifest.csv");
  note_output(r, dir / "streetview" / "manifest.csv");
  r.seeds["scene"] = spec.seed;
  r.notes["views"] = scene.views.size();
  r.notes["cameras"] = records.size();
  log << "synth: " << scene.views.size() << " views, " << records.size()
      << " street-level cameras -> " << dir.string() << '\n';
  return r;
}

StageResult stage_refine(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  require_file(c.height_path(), "height map");
  require_file(c.footprint_path(), "footprint mask");
  require_file(geo_sidecar_path(c.height_path()), "height map georeference");
  require_file(geo_sidecar_path(c.footprint_path()), "footprint georeference");
  note_input(r, c.height_path());
  note_input(r, c.footprint_path());
  const HeightField hf = read_heightfield(c.height_path());
  const FootprintMask mask = read_footprint(c.footprint_path());
  const RefineResult res = refine_geometry(hf, mask, c.refine);
  const fs::path dir = c.refine_dir();
  make_dir(dir);
  write_heightfield(res.refined, dir / "refined.pfm");
  write_polygons(res.polygons, dir / "buildings.json");
  write_plane(res.plane, dir / "plane.json");
  write_footprint({res.building_cells, hf.georef}, dir / "building_cells.png");
  for (const char* f : {"refined.pfm", "buildings.json", "plane.json", "building_cells.png"})
    note_output(r, dir / f);
  std::size_t regularized = 0;
  for (const auto& p : res.polygons) regularized += p.regularized;
  r.seeds["ransac"] = c.refine.ransac.seed;
  r.notes["buildings"] = res.polygons.size();
  r.notes["regularized"] = regularized;
  r.notes["plane_inlier_rms"] = res.plane.inlier_rms;
  log << "refine: " << res.polygons.size() << " buildings (" << regularized
      << " regularized), plane rms " << res.plane.inlier_rms << " m\n";
  return r;
}

StageResult stage_fuse(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  const fs::path rd = c.refine_dir();
  for (const char* f : {"refined.pfm", "building_cells.png", "plane.json"}) {
    require_file(rd / f, "refine output");
    note_input(r, rd / f);
  }
  const HeightField hf = read_heightfield(rd / "refined.pfm");
  const Raster cells = read_footprint(rd / "building_cells.png").raster;
  const GroundPlane plane = read_plane(rd / "plane.json");
  const std::vector<SatelliteView> views = load_views(c, r);

  const TexturedSurface mesh = build_surface_mesh(hf, c.wall_threshold, cells, plane);
  const TextureSamples samples = project_textures(mesh, views);
  const ColorAdjustment adj = solve_color_consistency(samples, c.min_shared_texels);
  const TexturedSurface fused = fuse(mesh, samples, adj);

  nlohmann::ordered_json extra;
  nlohmann::ordered_json vlist = nlohmann::ordered_json::array();
  for (const auto& v : views) vlist.push_back({{"id", v.id}});
  extra["views"] = vlist;
  extra["adjustments"] = adjustment_to_json(adj);
  extra["uncovered_texels"] = samples.uncovered;
  extra["objective_identity"] =
      color_objective(samples, ColorAdjustment::identity(samples.view_ids));
  extra["objective_solved"] = color_objective(samples, adj);
  save_surface(fused, c.surface_dir(), extra);
  note_output(r, c.surface_dir() / "manifest.json");
  note_output(r, c.surface_dir() / "faces.bin");
  note_output(r, c.surface_dir() / "atlas.pfm");
  r.notes["faces"] = fused.faces.size();
  r.notes["texels"] = fused.texel_count();
  r.notes["uncovered_texels"] = samples.uncovered;
  log << "fuse: " << fused.faces.size() << " faces, " << fused.texel_count()
      << " texels, " << samples.uncovered << " without coverage\n";
  return r;
}

StageResult stage_render(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  require_file(c.surface_dir() / "manifest.json", "textured surface");
  require_file(c.manifest_path(), "street-view manifest");
  note_input(r, c.surface_dir() / "manifest.json");
  note_input(r, c.manifest_path());
  const TexturedSurface surface = load_surface(c.surface_dir());
  const auto records = read_streetview_manifest(c.manifest_path());
  std::set<std::string> seen;
  RenderOptions opt{c.render_canny_low, c.render_canny_high};
  for (const auto& rec : records) {
    const std::string stem = rec.path.stem().string();
    if (!seen.insert(stem).second)
      throw ValidationError("cli.render: duplicate image stem '" + stem + "' in manifest");
    PanoCamera cam;
    cam.lat = rec.lat;
    cam.lon = rec.lon;
    cam.heading = rec.heading;
    cam.height_above_ground = c.camera_height;
    cam.width = c.pano_width;
    cam.height = c.pano_height;
    const PanoramaBundle b = render_panorama(surface, cam, opt);
    write_bundle(b, c.pano_dir(), stem);
    note_output(r, c.pano_dir() / (stem + ".rgb.png"));
  }
  r.notes["panoramas"] = records.size();
  log << "render: " << records.size() << " panoramas -> " << c.pano_dir().string() << '\n';
  return r;
}

StageResult stage_condition(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  const fs::path dir = c.condition_dir();
  make_dir(dir);
  std::ofstream index(dir / "conditions.jsonl", std::ios::trunc);
  if (!index) throw IoError("cli.condition: cannot write conditions.jsonl");
  std::size_t external = 0;
  const auto stems = bundle_stems(c.pano_dir());
  for (const auto& stem : stems) {
    note_input(r, c.pano_dir() / (stem + ".cam.json"));
    const PanoramaBundle b = read_bundle(c.pano_dir(), stem);
    Raster edge;
    std::string source = "canny";
    const fs::path ext = c.edge_dir.empty() ? fs::path() : c.edge_dir / (stem + ".png");
    if (!ext.empty() && fs::exists(ext)) {
      edge = read_raster(ext, RasterFormat::kPng8);
      if (edge.width() != b.rgb.width() || edge.height() != b.rgb.height() ||
          edge.channels() != 1)
        throw DimMismatch("cli.condition: external edge map " + ext.string() +
                          " does not match the panorama");
      for (auto& v : edge.u8_data()) v = v ? 255 : 0;
      source = ext.generic_string();
      ++external;
      note_input(r, ext);
    } else {
      edge = panorama_edges(b.rgb, b.sky_mask,
                            {c.condition_canny_low, c.condition_canny_high});
    }
    write_raster(b.rgb, dir / (stem + ".texture.png"));
    write_raster(edge, dir / (stem + ".edge.png"));
    write_raster(b.depth, dir / (stem + ".depth.pfm"));
    write_raster(b.semantic, dir / (stem + ".sem.png"));
    write_raster(b.sky_mask, dir / (stem + ".sky.png"));
    nlohmann::ordered_json j;
    j["stem"] = stem;
    j["texture"] = stem + ".texture.png";
    j["edge"] = stem + ".edge.png";
    j["depth"] = stem + ".depth.pfm";
    j["semantic"] = stem + ".sem.png";
    j["sky"] = stem + ".sky.png";
    j["edge_source"] = source;
    j["lat"] = b.camera.lat;
    j["lon"] = b.camera.lon;
    j["heading_deg"] = b.camera.heading;
    index << j.dump() << '\n';
    note_output(r, dir / (stem + ".texture.png"));
  }
  note_output(r, dir / "conditions.jsonl");
  r.notes["bundles"] = stems.size();
  r.notes["external_edges"] = external;
  log << "condition: " << stems.size() << " condition bundles -> " << dir.string() << '\n';
  return r;
}

StageResult stage_pair(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  require_file(c.manifest_path(), "street-view manifest");
  note_input(r, c.manifest_path());
  const auto records = read_streetview_manifest(c.manifest_path());
  std::vector<NamedBundle> bundles;
  for (const auto& stem : bundle_stems(c.pano_dir()))
    bundles.push_back({stem, read_bundle(c.pano_dir(), stem)});
  const PairingResult res = pair_dataset(bundles, records, c.pair_threshold);
  const fs::path dir = c.pairing_dir();
  make_dir(dir);
  write_pairing_report(res, dir / "report.jsonl");
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& p : res.pairs)
    pairs.push_back({{"bundle", p.bundle_stem},
                     {"gt", p.gt_path.generic_string()},
                     {"ratio", p.overlap_ratio},
                     {"lat", p.lat},
                     {"lon", p.lon},
                     {"heading_deg", p.heading}});
  write_json(pairs, dir / "pairs.json");
  note_output(r, dir / "report.jsonl");
  note_output(r, dir / "pairs.json");
  r.notes["candidates"] = res.log.size();
  r.notes["kept"] = res.pairs.size();
  log << "pair: kept " << res.pairs.size() << " of " << res.log.size() << " candidates\n";
  return r;
}

StageResult stage_split(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  const fs::path in = c.pairing_dir() / "pairs.json";
  require_file(in, "pair list");
  note_input(r, in);
  std::vector<ConditionPair> pairs;
  try {
    std::ifstream f(in);
    nlohmann::json j;
    f >> j;
    for (const auto& e : j) {
      ConditionPair p;
      p.bundle_stem = e.at("bundle").get<std::string>();
      p.gt_path = e.at("gt").get<std::string>();
      p.overlap_ratio = e.at("ratio").get<double>();
      p.lat = e.at("lat").get<double>();
      p.lon = e.at("lon").get<double>();
      p.heading = e.at("heading_deg").get<double>();
      pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cli.split: " + in.string() + ": " + e.what());
  }
  const SplitAssignment split = tile_split(pairs, c.tile_m, c.split_seed, c.split_ratio);
  if (!split_is_leak_free(split))
    throw RuntimeError("cli.split: a tile was assigned to two splits");
  make_dir(c.out);
  write_splits(split, c.out / "splits.json");
  note_output(r, c.out / "splits.json");
  r.seeds["split"] = c.split_seed;
  r.notes["tiles"] = split.tiles.size();
  log << "split: " << split.tiles.size() << " tiles, min test-train distance "
      << split.min_test_train_distance << " m\n";
  return r;
}

StageResult stage_metrics(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  require_file(c.manifest_path(), "street-view manifest");
  note_input(r, c.manifest_path());
  const auto records = read_streetview_manifest(c.manifest_path());
  const fs::path pred_dir = c.pred_path();
  std::vector<PerceptualPair> perceptual;
  std::vector<MetricReport> reports;
  const MetricOptions opt{c.metrics_canny_low, c.metrics_canny_high};
  for (const auto& rec : records) {
    const std::string stem = rec.path.stem().string();
    fs::path pred = pred_dir / (stem + ".png");
    if (!fs::exists(pred) && fs::exists(pred_dir / (stem + ".rgb.png")))
      pred = pred_dir / (stem + ".rgb.png");
    perceptual.push_back({pred, rec.path});
    if (!fs::exists(pred) || !fs::exists(rec.path)) continue;
    const Raster p = read_raster(pred, RasterFormat::kPng8);
    const Raster g = read_raster(rec.path, RasterFormat::kPng8);
    fs::path gt_sem = rec.path;
    gt_sem.replace_extension(".sem.png");
    const fs::path pred_sem = pred_dir / (stem + ".sem.png");
    Raster ps, gs;
    const bool labels = fs::exists(gt_sem) && fs::exists(pred_sem);
    if (labels) {
      ps = read_raster(pred_sem, RasterFormat::kPng8);
      gs = read_raster(gt_sem, RasterFormat::kPng8);
    }
    reports.push_back(evaluate_pair(stem, p, g, labels ? &ps : nullptr,
                                    labels ? &gs : nullptr, opt));
    note_input(r, pred);
    note_input(r, rec.path);
  }
  make_dir(c.out);
  write_metrics_json(reports, opt, c.out / "metrics.json");
  const std::size_t missing = export_perceptual_manifest(perceptual, c.out / "perceptual.jsonl");
  note_output(r, c.out / "metrics.json");
  note_output(r, c.out / "perceptual.jsonl");
  r.notes["evaluated"] = reports.size();
  r.notes["missing"] = missing;
  log << "metrics: " << reports.size() << " pairs evaluated";
  if (missing) log << ", " << missing << " with missing files";
  log << '\n';
  if (missing) r.exit_code = 1;
  return r;
}

std::array<std::uint8_t, 3> depth_color(float d, double log_max) {
  if (!std::isfinite(d)) return {0, 0, 0};
  const double x = std::clamp(std::log1p(std::max(0.0f, d)) / log_max, 0.0, 1.0);
  // Near is warm, far is cool.
  static const double stops[5][3] = {
      {180, 4, 38}, {244, 109, 67}, {254, 224, 144}, {116, 173, 209}, {49, 54, 149}};
  const double s = x * 4.0;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  std::array<std::uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k)
    c[k] = static_cast<std::uint8_t>(std::lround(std::lerp(stops[i][k], stops[i + 1][k], f)));
  return c;
}

StageResult stage_preview(const PipelineConfig& c, std::ostream& log) {
  StageResult r;
  const fs::path dir = c.preview_dir();
  make_dir(dir);
  const auto stems = bundle_stems(c.pano_dir());
  for (const auto& stem : stems) {
    note_input(r, c.pano_dir() / (stem + ".cam.json"));
    const PanoramaBundle b = read_bundle(c.pano_dir(), stem);
    // Prefer the condition-stage edge map when present.
    Raster edge = b.edge;
    const fs::path cond_edge = c.condition_dir() / (stem + ".edge.png");
    if (fs::exists(cond_edge)) edge = read_raster(cond_edge, RasterFormat::kPng8);
    const fs::path cond_tex = c.condition_dir() / (stem + ".texture.png");
    const Raster texture =
        fs::exists(cond_tex) ? read_raster(cond_tex, RasterFormat::kPng8) : b.rgb;
    const int w = b.rgb.width(), h = b.rgb.height();
    float dmax = 1.0f;
    for (float d : b.depth.f32_data())
      if (std::isfinite(d)) dmax = std::max(dmax, d);
    const double log_max = std::log1p(static_cast<double>(dmax));
    Raster m = Raster::u8(3 * w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto dc = depth_color(b.depth.f32_at(x, y), log_max);
        for (int k = 0; k < 3; ++k) {
          m.u8_at(x, y, k) = texture.u8_at(x, y, k);
          m.u8_at(w + x, y, k) = edge.u8_at(x, y);
          m.u8_at(2 * w + x, y, k) = dc[k];
        }
      }
    write_raster(m, dir / (stem + ".png"));
    note_output(r, dir / (stem + ".png"));
  }
  r.notes["montages"] = stems.size();
  log << "preview: " << stems.size() << " montages -> " << dir.string() << '\n';
  return r;
}

}  // namespace

StageResult run_stage(const std::string& sub, const PipelineConfig& c, std::ostream& log) {
  set_worker_count(c.workers);
  if (sub == "synth") return stage_synth(c, log);
  if (sub == "refine") return stage_refine(c, log);
  if (sub == "fuse") return stage_fuse(c, log);
  if (sub == "render") return stage_render(c, log);
  if (sub == "condition") return stage_condition(c, log);
  if (sub == "pair") return stage_pair(c, log);
  if (sub == "split") return stage_split(c, log);
  if (sub == "metrics") return stage_metrics(c, log);
  if (sub == "preview") return stage_preview(c, log);
  throw ValidationError("cli: unknown subcommand '" + sub + "'");
}

namespace {

nlohmann::json paths_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["out"] = c.out.generic_string();
  j["height"] = c.height_path().generic_string();
  j["footprint"] = c.footprint_path().generic_string();
  j["manifest"] = c.manifest_path().generic_string();
  j["scene"] = c.scene.generic_string();
  j["edge_dir"] = c.edge_dir.generic_string();
  j["pred_dir"] = c.pred_path().generic_string();
  j["views_dir"] = c.views_dir.generic_string();
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : c.views) views.push_back(v.generic_string());
  j["views"] = views;
  return j;
}

void record_run(const std::string& sub, const PipelineConfig& c, const StageResult& r,
                const std::string& status, const std::string& message) {
  const fs::path path = c.out / "run.json";
  nlohmann::json j = nlohmann::json::object();
  if (fs::exists(path)) {
    try {
      std::ifstream in(path);
      in >> j;
    } catch (const nlohmann::json::exception&) {
      j = nlohmann::json::object();
    }
    if (!j.is_object()) j = nlohmann::json::object();
  }
  nlohmann::json entry;
  entry["subcommand"] = sub;
  entry["status"] = status;
  entry["exit_code"] = r.exit_code;
  entry["message"] = message;
  entry["config_hash"] = config_hash(c);
  entry["config"] = tunables_json(c);
  entry["paths"] = paths_json(c);
  entry["inputs"] = r.inputs;
  entry["outputs"] = r.outputs;
  entry["seeds"] = r.seeds;
  entry["notes"] = r.notes;
  entry["versions"] = {{"crossview", kVersion},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"libpng", PNG_LIBPNG_VER_STRING}};
  j["stages"][sub] = entry;
  std::error_code ec;
  fs::create_directories(c.out, ec);
  std::ofstream out(path, std::ios::trunc);
  if (out) out << j.dump(2) << '\n';
}

}  // namespace

int run_and_record(const std::string& sub, const PipelineConfig& c, std::ostream& log,
                   std::ostream& err) {
  StageResult r;
  std::string status = "ok", message;
  try {
    r = run_stage(sub, c, log);
    if (r.exit_code != 0) status = "incomplete";
  } catch (const ValidationError& e) {
    r.exit_code = 1;
    status = "validation_error";
    message = e.what();
  } catch (const RuntimeError& e) {
    r.exit_code = 2;
    status = "runtime_error";
    message = e.what();
  } catch (const std::exception& e) {
    r.exit_code = 2;
    status = "runtime_error";
    message = e.what();
  }
  if (!message.empty()) err << "error: " << message << '\n';
  record_run(sub, c, r, status, message);
  return r.exit_code;
}

}  // namespace crossview
