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

#include "crossview/synth_scene.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "crossview/parallel.hpp"
#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool inside_box(const SceneBox& b, double e, double n) {
  const double c = std::cos(-b.yaw_deg * kDeg), s = std::sin(-b.yaw_deg * kDeg);
  const double x = e - b.east, y = n - b.north;
  const double lx = c * x - s * y, ly = s * x + c * y;
  return std::abs(lx) <= 0.5 * b.width && std::abs(ly) <= 0.5 * b.depth;
}

std::array<Eigen::Vector2d, 4> box_corners(const SceneBox& b) {
  const double c = std::cos(b.yaw_deg * kDeg), s = std::sin(b.yaw_deg * kDeg);
  std::array<Eigen::Vector2d, 4> out;
  const double hx[4] = {-1, 1, 1, -1}, hy[4] = {-1, -1, 1, 1};
  for (int i = 0; i < 4; ++i) {
    const double x = hx[i] * 0.5 * b.width, y = hy[i] * 0.5 * b.depth;
    out[i] = {b.east + c * x - s * y, b.north + s * x + c * y};
  }
  return out;
}

void check_color(const Rgb& c, const std::string& what) {
  for (double v : c)
    if (!(v >= 0.0 && v <= 255.0))
      throw SpecError("synth_scene: " + what + " color outside [0, 255]");
}

struct SurfaceHit {
  double t = std::numeric_limits<double>::infinity();
  bool building = false;
  Rgb color{};
};

// Ray o + t d, t in [t_min, t_max]. Ground hits outside the tile count only
// when `ground_everywhere` is set.
std::optional<SurfaceHit> intersect(const SceneSpec& spec, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d, double t_min,
                                    double t_max, bool ground_everywhere) {
  SurfaceHit best;
  const double denom = d.z() - spec.plane_a * d.x() - spec.plane_b * d.y();
  if (denom != 0.0) {
    const double t = (spec.ground_at(o.x(), o.y()) - o.z()) / denom;
    if (t >= t_min && t <= t_max) {
      const Eigen::Vector3d p = o + t * d;
      const bool in_tile = p.x() >= 0.0 && p.y() >= 0.0 && p.x() < spec.tile_m &&
                           p.y() < spec.tile_m;
      if (ground_everywhere || in_tile) {
        best.t = t;
        best.building = false;
        best.color = ground_radiance(spec, p.x(), p.y());
      }
    }
  }
  for (const SceneBox& b : spec.boxes) {
    const double c = std::cos(-b.yaw_deg * kDeg), s = std::sin(-b.yaw_deg * kDeg);
    const double ox = o.x() - b.east, oy = o.y() - b.north;
    const Eigen::Vector3d lo(c * ox - s * oy, s * ox + c * oy, o.z());
    const Eigen::Vector3d ld(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
    const double lo_b[3] = {-0.5 * b.width, -0.5 * b.depth, -1e6};
    const double hi_b[3] = {0.5 * b.width, 0.5 * b.depth, spec.box_top(b)};
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    int axis = -1;
    double sign = 0.0;
    bool miss = false;
    for (int k = 0; k < 3 && !miss; ++k) {
      if (ld[k] == 0.0) {
        miss = lo[k] < lo_b[k] || lo[k] > hi_b[k];
        continue;
      }
      double ta = (lo_b[k] - lo[k]) / ld[k], tb = (hi_b[k] - lo[k]) / ld[k];
      double sg = -1.0;  // entering through the low side
      if (ta > tb) {
        std::swap(ta, tb);
        sg = 1.0;
      }
      if (ta > t0) {
        t0 = ta;
        axis = k;
        sign = sg;
      }
      t1 = std::min(t1, tb);
    }
    if (miss || axis < 0 || t0 > t1 || t0 < t_min || t0 > t_max || t0 >= best.t)
      continue;
    best.t = t0;
    best.building = true;
    if (axis == 2) {
      best.color = b.roof_color;
    } else {
      // Shade each facade by orientation so adjacent walls differ.
      const double shade = axis == 0 ? (sign > 0 ? 1.0 : 0.8) : (sign > 0 ? 0.9 : 0.7);
      for (int k = 0; k < 3; ++k) best.color[k] = b.wall_color[k] * shade;
    }
  }
  if (!std::isfinite(best.t)) return std::nullopt;
  return best;
}

struct ViewGeometry {
  double margin = 0.0;  // meters around the tile
  int width = 0;
  int height = 0;
  double z_min = 0.0;
  double z_max = 0.0;
};

ViewGeometry view_geometry(const SceneSpec& spec, const SceneView& v) {
  ViewGeometry g;
  const double t = spec.tile_m;
  const double corners[4] = {spec.ground_at(0, 0), spec.ground_at(t, 0),
                             spec.ground_at(0, t), spec.ground_at(t, t)};
  g.z_min = *std::min_element(corners, corners + 4) -
            4.0 * spec.ground_noise_sigma - 1.0;
  g.z_max = *std::max_element(corners, corners + 4) + 1.0;
  for (const auto& b : spec.boxes) g.z_max = std::max(g.z_max, spec.box_top(b) + 1.0);
  const double zabs = std::max(std::abs(g.z_min), std::abs(g.z_max));
  g.margin = zabs * std::tan(v.off_nadir_deg * kDeg) + 4.0 * spec.image_gsd;
  const int n = static_cast<int>(std::ceil((t + 2.0 * g.margin) / spec.image_gsd)) + 1;
  g.width = g.height = n;
  return g;
}

}  // namespace

int SceneSpec::raster_size() const {
  const double n = std::round(tile_m / gsd);
  if (!(n >= 1.0) || std::abs(n * gsd - tile_m) > 1e-9 * tile_m)
    throw SpecError("synth_scene: tile_m must be a whole number of gsd");
  return static_cast<int>(n);
}

GeoRef SceneSpec::georef() const {
  GeoRef g;
  g.origin_lat = origin_lat;
  g.origin_lon = origin_lon;
  g.gsd = gsd;
  return g;
}

void SceneSpec::validate() const {
  if (!(tile_m > 0.0) || !(gsd > 0.0) || !(image_gsd > 0.0))
    throw SpecError("synth_scene: tile_m, gsd and image_gsd must be > 0");
  raster_size();
  if (!(ground_noise_sigma >= 0.0))
    throw SpecError("synth_scene: ground_noise_sigma must be >= 0");
  if (pano_height < 1 || pano_width != 2 * pano_height)
    throw SpecError("synth_scene: pano_width must be 2 * pano_height");
  check_color(ground_color, "ground");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const SceneBox& b = boxes[i];
    const std::string name = "box " + std::to_string(i);
    if (!(b.height > 0.0) || !(b.width > 0.0) || !(b.depth > 0.0))
      throw SpecError("synth_scene: " + name + " needs positive size and height");
    for (const auto& c : box_corners(b))
      if (c.x() < -1e-9 || c.y() < -1e-9 || c.x() > tile_m + 1e-9 ||
          c.y() > tile_m + 1e-9)
        throw SpecError("synth_scene: " + name + " extends outside the tile");
    check_color(b.roof_color, name + " roof");
    check_color(b.wall_color, name + " wall");
  }
  std::set<int> ids;
  for (const SceneView& v : views) {
    if (!ids.insert(v.id).second)
      throw SpecError("synth_scene: duplicate view id " + std::to_string(v.id));
    if (!(v.off_nadir_deg >= 0.0 && v.off_nadir_deg < 60.0))
      throw SpecError("synth_scene: off_nadir_deg must be in [0, 60)");
    if (!(v.rpc_perturbation >= 0.0 && v.rpc_perturbation <= 1e-3))
      throw SpecError("synth_scene: rpc_perturbation must be in [0, 1e-3]");
    for (double g : v.gain)
      if (!(g > 0.0)) throw SpecError("synth_scene: view gains must be > 0");
  }
  for (const SceneCamera& c : cameras) {
    if (!(c.east > 0.0 && c.north > 0.0 && c.east < tile_m && c.north < tile_m))
      throw SpecError("synth_scene: camera " + c.name + " outside the tile");
    for (const auto& b : boxes)
      if (inside_box(b, c.east, c.north))
        throw SpecError("synth_scene: camera " + c.name + " inside a box");
  }
}

SceneSpec default_scene() {
  SceneSpec s;
  s.ground_noise_sigma = 0.1;
  s.boxes = {
      {16.0, 44.0, 12.0, 10.0, 15.0, 0.0, {170, 80, 60}, {215, 200, 170}},
      {46.0, 46.0, 14.0, 16.0, 24.0, 0.0, {90, 95, 130}, {190, 195, 205}},
      {40.0, 16.0, 20.0, 10.0, 10.0, 0.0, {150, 150, 150}, {225, 180, 140}},
  };
  s.views = {
      {0, 5.0, 0.0, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, 1e-3},
      {1, 20.0, 90.0, {1.1, 1.05, 0.95}, {-5.0, 2.0, 6.0}, 1e-3},
      {2, 25.0, 210.0, {0.9, 0.92, 1.04}, {8.0, 4.0, -3.0}, 1e-3},
      {3, 15.0, 300.0, {1.05, 1.0, 1.1}, {3.0, -2.0, 0.0}, 1e-3},
  };
  s.cameras = {
      {"cam_a", 30.5, 30.5, 0.0},
      {"cam_b", 8.5, 24.5, 90.0},
      {"cam_c", 56.5, 26.5, 180.0},
  };
  return s;
}

Rgb ground_radiance(const SceneSpec& spec, double e, double n) {
  Rgb c;
  for (int k = 0; k < 3; ++k)
    c[k] = std::clamp(spec.ground_color[k] + 20.0 * std::sin(0.45 * e + 1.3 * k) *
                                                 std::cos(0.31 * n - 0.7 * k),
                      0.0, 255.0);
  return c;
}

RpcModel scene_rpc(const SceneSpec& spec, const SceneView& v) {
  const ViewGeometry g = view_geometry(spec, v);
  const int n = spec.raster_size();
  const TileFrame frame(spec.georef(), n, n);
  // east = ae lon + be, north = an lat + bn
  const double ae = frame.meters_per_deg_lon(), be = frame.east_of_lon(0.0);
  const double an = frame.meters_per_deg_lat(), bn = frame.north_of_lat(0.0);
  const double tan_t = std::tan(v.off_nadir_deg * kDeg);
  const double ts = tan_t * std::sin(v.azimuth_deg * kDeg);
  const double tc = tan_t * std::cos(v.azimuth_deg * kDeg);

  RpcModel m;
  m.lat_off = frame.lat_of(0.5 * spec.tile_m);
  m.lon_off = frame.lon_of(0.5 * spec.tile_m);
  m.lat_scale = (0.5 * spec.tile_m + g.margin) / an * 1.25;
  m.lon_scale = (0.5 * spec.tile_m + g.margin) / ae * 1.25;
  m.height_off = 0.5 * (g.z_min + g.z_max);
  // Generous, as in delivered RPCs: view directions probe 10 m above points.
  m.height_scale = std::max(25.0, 0.5 * (g.z_max - g.z_min)) * 1.25;
  m.samp_off = 0.5 * (g.width - 1);
  m.samp_scale = 0.5 * g.width;
  m.line_off = 0.5 * (g.height - 1);
  m.line_scale = 0.5 * g.height;
  const double gi = spec.image_gsd;

  // samp = (east - ts z + margin) / gi
  m.samp_num[0] = ((ae * m.lon_off + be - ts * m.height_off + g.margin) / gi - m.samp_off) /
                  m.samp_scale;
  m.samp_num[1] = ae * m.lon_scale / (gi * m.samp_scale);
  m.samp_num[3] = -ts * m.height_scale / (gi * m.samp_scale);
  // line = (tile + margin - north + tc z) / gi
  m.line_num[0] = ((spec.tile_m + g.margin - an * m.lat_off - bn + tc * m.height_off) / gi -
                   m.line_off) /
                  m.line_scale;
  m.line_num[2] = -an * m.lat_scale / (gi * m.line_scale);
  m.line_num[3] = tc * m.height_scale / (gi * m.line_scale);
  m.line_den[0] = 1.0;
  m.samp_den[0] = 1.0;

  if (v.rpc_perturbation > 0.0) {
    std::mt19937_64 rng(spec.seed * 1000003ULL + static_cast<std::uint64_t>(v.id));
    std::uniform_real_distribution<double> u(-v.rpc_perturbation, v.rpc_perturbation);
    for (int term : {4, 7, 8, 11, 12, 14, 15}) {
      m.line_num[term] = u(rng);
      m.samp_num[term] = u(rng);
    }
  }
  return m;
}

SyntheticScene generate(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene out;
  out.spec = spec;
  const int n = spec.raster_size();
  const GeoRef geo = spec.georef();
  const TileFrame frame(geo, n, n);
  out.height.raster = Raster::f32(n, n, 1);
  out.height.georef = geo;
  out.footprint.raster = Raster::u8(n, n, 1);
  out.footprint.georef = geo;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double e = frame.east_of(x + 0.5), nn = frame.north_of(y + 0.5);
      double top = -std::numeric_limits<double>::infinity();
      for (const auto& b : spec.boxes)
        if (inside_box(b, e, nn)) top = std::max(top, spec.box_top(b));
      if (std::isfinite(top)) {
        out.height.raster.f32_at(x, y) = static_cast<float>(top);
        out.footprint.raster.u8_at(x, y) = 1;
      } else {
        double z = spec.ground_at(e, nn);
        if (spec.ground_noise_sigma > 0.0) z += spec.ground_noise_sigma * noise(rng);
        out.height.raster.f32_at(x, y) = static_cast<float>(z);
      }
    }

  for (const SceneView& v : spec.views) {
    const ViewGeometry g = view_geometry(spec, v);
    SatelliteView sv;
    sv.id = v.id;
    sv.rpc = scene_rpc(spec, v);
    sv.image = Raster::u8(g.width, g.height, 3);
    parallel_for(static_cast<std::size_t>(g.height), [&](std::size_t r0, std::size_t r1) {
      for (int row = static_cast<int>(r0); row < static_cast<int>(r1); ++row) {
        std::optional<GeoPoint> guess;
        for (int col = 0; col < g.width; ++col) {
          InverseOptions opt;
          opt.initial_guess = guess;
          const GeoPoint hi = inverse_project(sv.rpc, row, col, g.z_max, opt);
          opt.initial_guess = hi;
          const GeoPoint lo = inverse_project(sv.rpc, row, col, g.z_min, opt);
          guess = hi;
          const Eigen::Vector3d a(frame.east_of_lon(hi.lon), frame.north_of_lat(hi.lat),
                                  g.z_max);
          const Eigen::Vector3d b(frame.east_of_lon(lo.lon), frame.north_of_lat(lo.lat),
                                  g.z_min);
          const auto hit = intersect(spec, a, b - a, 0.0, 1.0, true);
          Rgb radiance = hit ? hit->color : spec.ground_color;
          for (int c = 0; c < 3; ++c) {
            const double obs = v.gain[c] * radiance[c] + v.bias[c];
            sv.image.u8_at(col, row, c) =
                static_cast<std::uint8_t>(std::lround(std::clamp(obs, 0.0, 255.0)));
          }
        }
      }
    });
    out.views.push_back(std::move(sv));
  }
  return out;
}

std::optional<OracleHit> oracle_raycast(const SceneSpec& spec,
                                        const Eigen::Vector3d& origin,
                                        const Eigen::Vector3d& dir) {
  const auto hit = intersect(spec, origin, dir, 1e-9,
                             std::numeric_limits<double>::infinity(), false);
  if (!hit) return std::nullopt;
  return OracleHit{hit->t, hit->building, hit->color};
}

PanoCamera scene_camera(const SceneSpec& spec, const SceneCamera& c) {
  const int n = spec.raster_size();
  const TileFrame frame(spec.georef(), n, n);
  PanoCamera cam;
  cam.lat = frame.lat_of(c.north);
  cam.lon = frame.lon_of(c.east);
  cam.heading = c.heading_deg;
  cam.width = spec.pano_width;
  cam.height = spec.pano_height;
  return cam;
}

PanoramaBundle oracle_panorama(const SceneSpec& spec, const PanoCamera& cam,
                               std::optional<double> origin_z,
                               const RenderOptions& options) {
  cam.validate();
  const int n = spec.raster_size();
  const TileFrame frame(spec.georef(), n, n);
  const double e = frame.east_of_lon(cam.lon), nn = frame.north_of_lat(cam.lat);
  const Eigen::Vector3d o(e, nn,
                          origin_z ? *origin_z : spec.ground_at(e, nn) + cam.height_above_ground);
  const int w = cam.width, h = cam.height;
  PanoramaBundle b;
  b.camera = cam;
  b.rgb = Raster::u8(w, h, 3);
  b.depth = Raster::f32(w, h, 1);
  b.semantic = Raster::u8(w, h, 1);
  b.sky_mask = Raster::u8(w, h, 1);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t r0, std::size_t r1) {
    for (int v = static_cast<int>(r0); v < static_cast<int>(r1); ++v)
      for (int u = 0; u < w; ++u) {
        const auto hit = oracle_raycast(spec, o, pixel_to_ray(cam, u, v));
        if (!hit) {
          for (int c = 0; c < 3; ++c) b.rgb.u8_at(u, v, c) = kSkyColor[c];
          b.depth.f32_at(u, v) = std::numeric_limits<float>::infinity();
          b.semantic.u8_at(u, v) = kSky;
          b.sky_mask.u8_at(u, v) = 1;
          continue;
        }
        for (int c = 0; c < 3; ++c)
          b.rgb.u8_at(u, v, c) = static_cast<std::uint8_t>(
              std::lround(std::clamp(hit->color[c], 0.0, 255.0)));
        b.depth.f32_at(u, v) = static_cast<float>(hit->t);
        b.semantic.u8_at(u, v) = hit->building ? kBuilding : kGround;
      }
  });
  b.edge = panorama_edges(b.rgb, b.sky_mask, options);
  return b;
}

// ---------------------------------------------------------------------------
// scene.json

namespace {

using Json = nlohmann::json;

void only_keys(const Json& j, std::initializer_list<const char*> keys,
               const std::string& where) {
  if (!j.is_object()) throw SpecError("synth_scene: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw SpecError("synth_scene: unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SceneSpec read_scene(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("synth_scene: cannot open " + path.string());
  SceneSpec s;
  try {
    Json j;
    in >> j;
    only_keys(j,
              {"tile_m", "gsd", "origin_lat", "origin_lon", "plane", "ground_noise_sigma",
               "ground_color", "seed", "image_gsd", "pano_width", "pano_height", "boxes",
               "views", "cameras"},
              "scene");
    get_opt(j, "tile_m", s.tile_m);
    get_opt(j, "gsd", s.gsd);
    get_opt(j, "origin_lat", s.origin_lat);
    get_opt(j, "origin_lon", s.origin_lon);
    if (j.contains("plane")) {
      only_keys(j["plane"], {"a", "b", "c"}, "plane");
      get_opt(j["plane"], "a", s.plane_a);
      get_opt(j["plane"], "b", s.plane_b);
      get_opt(j["plane"], "c", s.plane_c);
    }
    get_opt(j, "ground_noise_sigma", s.ground_noise_sigma);
    get_opt(j, "ground_color", s.ground_color);
    get_opt(j, "seed", s.seed);
    get_opt(j, "image_gsd", s.image_gsd);
    get_opt(j, "pano_width", s.pano_width);
    get_opt(j, "pano_height", s.pano_height);
    if (j.contains("boxes")) {
      s.boxes.clear();
      for (const auto& jb : j["boxes"]) {
        only_keys(jb,
                  {"east", "north", "width", "depth", "height", "yaw_deg", "roof_color",
                   "wall_color"},
                  "box");
        SceneBox b;
        b.east = jb.at("east").get<double>();
        b.north = jb.at("north").get<double>();
        b.width = jb.at("width").get<double>();
        b.depth = jb.at("depth").get<double>();
        b.height = jb.at("height").get<double>();
        get_opt(jb, "yaw_deg", b.yaw_deg);
        get_opt(jb, "roof_color", b.roof_color);
        get_opt(jb, "wall_color", b.wall_color);
        s.boxes.push_back(b);
      }
    }
    if (j.contains("views")) {
      s.views.clear();
      for (const auto& jv : j["views"]) {
        only_keys(jv,
                  {"id", "off_nadir_deg", "azimuth_deg", "gain", "bias", "rpc_perturbation"},
                  "view");
        SceneView v;
        v.id = jv.at("id").get<int>();
        get_opt(jv, "off_nadir_deg", v.off_nadir_deg);
        get_opt(jv, "azimuth_deg", v.azimuth_deg);
        get_opt(jv, "gain", v.gain);
        get_opt(jv, "bias", v.bias);
        get_opt(jv, "rpc_perturbation", v.rpc_perturbation);
        s.views.push_back(v);
      }
    }
    if (j.contains("cameras")) {
      s.cameras.clear();
      for (const auto& jc : j["cameras"]) {
        only_keys(jc, {"name", "east", "north", "heading_deg"}, "camera");
        SceneCamera c;
        c.name = jc.at("name").get<std::string>();
        c.east = jc.at("east").get<double>();
        c.north = jc.at("north").get<double>();
        get_opt(jc, "heading_deg", c.heading_deg);
        s.cameras.push_back(c);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("synth_scene: " + path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

void write_scene(const SceneSpec& s, const fs::path& path) {
  nlohmann::ordered_json j;
  j["tile_m"] = s.tile_m;
  j["gsd"] = s.gsd;
  j["origin_lat"] = s.origin_lat;
  j["origin_lon"] = s.origin_lon;
  j["plane"] = {{"a", s.plane_a}, {"b", s.plane_b}, {"c", s.plane_c}};
  j["ground_noise_sigma"] = s.ground_noise_sigma;
  j["ground_color"] = s.ground_color;
  j["seed"] = s.seed;
  j["image_gsd"] = s.image_gsd;
  j["pano_width"] = s.pano_width;
  j["pano_height"] = s.pano_height;
  j["boxes"] = nlohmann::ordered_json::array();
  for (const auto& b : s.boxes)
    j["boxes"].push_back({{"east", b.east},
                          {"north", b.north},
                          {"width", b.width},
                          {"depth", b.depth},
                          {"height", b.height},
                          {"yaw_deg", b.yaw_deg},
                          {"roof_color", b.roof_color},
                          {"wall_color", b.wall_color}});
  j["views"] = nlohmann::ordered_json::array();
  for (const auto& v : s.views)
    j["views"].push_back({{"id", v.id},
                          {"off_nadir_deg", v.off_nadir_deg},
                          {"azimuth_deg", v.azimuth_deg},
                          {"gain", v.gain},
                          {"bias", v.bias},
                          {"rpc_perturbation", v.rpc_perturbation}});
  j["cameras"] = nlohmann::ordered_json::array();
  for (const auto& c : s.cameras)
    j["cameras"].push_back({{"name", c.name},
                            {"east", c.east},
                            {"north", c.north},
                            {"heading_deg", c.heading_deg}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("synth_scene: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace crossview
