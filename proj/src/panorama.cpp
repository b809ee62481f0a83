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

#include "crossview/panorama.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "crossview/parallel.hpp"
#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

void PanoCamera::validate() const {
  if (width <= 0 || height <= 0 || width != 2 * height)
    throw ValidationError("pano_project: panorama width must be 2 * height, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  if (!(height_above_ground > 0.0))
    throw ValidationError("pano_project: height_above_ground must be > 0");
  if (!std::isfinite(lat) || !std::isfinite(lon) || !std::isfinite(heading))
    throw ValidationError("pano_project: camera pose must be finite");
}

void PanoramaBundle::validate() const {
  const int w = rgb.width(), h = rgb.height();
  for (const Raster* r : {&depth, &semantic, &sky_mask, &edge})
    if (r->width() != w || r->height() != h)
      throw DimMismatch("pano_project: bundle rasters differ in size");
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool sky = sky_mask.u8_at(x, y) != 0;
      if (sky != std::isinf(depth.f32_at(x, y)) ||
          sky != (semantic.u8_at(x, y) == kSky))
        throw ValidationError("pano_project: sky mask, depth and labels disagree");
    }
}

Eigen::Vector3d pixel_to_ray(const PanoCamera& cam, double u, double v) {
  if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height))
    throw OutOfBounds("pano_project.pixel_to_ray: pixel outside panorama");
  const double w = cam.width;
  // Azimuth in pixel steps. The heading is split into whole steps and a
  // remainder so that shifting it by whole steps shifts columns exactly.
  const double steps = cam.heading / 360.0 * w;
  double whole = std::floor(steps);
  double frac = steps - whole;
  if (frac < 1e-9) {
    frac = 0.0;
  } else if (frac > 1.0 - 1e-9) {
    frac = 0.0;
    whole += 1.0;
  }
  double col = std::fmod(std::fmod(whole, w) + w, w) + u;
  if (col >= w) col -= w;
  double a = col + 0.5 + frac;
  if (a >= w) a -= w;
  const double theta = a / w * 2.0 * std::numbers::pi;
  const double phi = std::numbers::pi * (0.5 - (v + 0.5) / cam.height);
  const double c = std::cos(phi);
  return {std::sin(theta) * c, std::cos(theta) * c, std::sin(phi)};
}

namespace {

void face_coords(const Face& f, const Eigen::Vector3d& p, Hit& hit) {
  const Eigen::Vector3d au = f.axis_u(), av = f.axis_v();
  hit.s = std::clamp((p - f.v[0]).dot(au) / au.squaredNorm(), 0.0, 1.0);
  hit.tv = std::clamp((p - f.v[0]).dot(av) / av.squaredNorm(), 0.0, 1.0);
}

}  // namespace

std::optional<Hit> raycast(const TexturedSurface& s, const Eigen::Vector3d& o,
                           const Eigen::Vector3d& d) {
  const TileFrame fr = s.frame();
  const int W = fr.width(), H = fr.height();
  const double g = fr.gsd();
  if (!(o.x() >= 0.0 && o.y() >= 0.0 && o.x() <= fr.extent_east() &&
        o.y() <= fr.extent_north()))
    throw OutOfBounds("pano_project.raycast: origin outside tile");
  int cx = std::clamp(fr.cell_x(o.x()), 0, W - 1);
  int cy = std::clamp(fr.cell_y(o.y()), 0, H - 1);
  if (s.field.valid_at(cx, cy) && o.z() < s.field.at(cx, cy))
    throw OriginBelowSurface("pano_project.raycast: origin at z=" +
                             std::to_string(o.z()) + " below surface " +
                             std::to_string(s.field.at(cx, cy)));

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int step_x = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
  const int step_row = d.y() > 0 ? -1 : (d.y() < 0 ? 1 : 0);  // north = up
  double t_max_x = kInf, t_max_y = kInf, dt_x = kInf, dt_y = kInf;
  if (step_x != 0) {
    const double line = step_x > 0 ? (cx + 1) * g : cx * g;
    t_max_x = (line - o.x()) / d.x();
    dt_x = g / std::abs(d.x());
  }
  if (step_row != 0) {
    const double line = step_row < 0 ? (H - cy) * g : (H - cy - 1) * g;
    t_max_y = (line - o.y()) / d.y();
    dt_y = g / std::abs(d.y());
  }

  auto make_hit = [&](int face, double t) {
    Hit h;
    h.face = face;
    h.t = t;
    h.kind = s.faces[face].kind;
    face_coords(s.faces[face], o + t * d, h);
    return h;
  };

  double t_in = 0.0;
  const double top = s.max_height;
  while (true) {
    const double t_out = std::min(t_max_x, t_max_y);
    const double z_in = o.z() + t_in * d.z();
    if (s.field.valid_at(cx, cy)) {
      const double hc = s.field.at(cx, cy);
      const int face = s.top_at(cx, cy);
      if (t_in > 0.0 && z_in < hc) return make_hit(face, t_in);
      if (d.z() < 0.0) {
        const double t = (hc - o.z()) / d.z();
        if (t >= t_in && t <= t_out) return make_hit(face, t);
      }
    }
    if (!std::isfinite(t_out)) return std::nullopt;
    if (d.z() >= 0.0 && z_in > top) return std::nullopt;

    int wall = -1;
    double t_cross;
    if (t_max_x <= t_max_y) {
      t_cross = t_max_x;
      const int line = step_x > 0 ? cx + 1 : cx;
      cx += step_x;
      if (cx < 0 || cx >= W) return std::nullopt;
      wall = s.wall_x_at(line, cy);
      t_max_x += dt_x;
    } else {
      t_cross = t_max_y;
      const int line = step_row < 0 ? cy : cy + 1;
      cy += step_row;
      if (cy < 0 || cy >= H) return std::nullopt;
      wall = s.wall_y_at(cx, line);
      t_max_y += dt_y;
    }
    if (wall >= 0) {
      const Face& f = s.faces[wall];
      const double z = o.z() + t_cross * d.z();
      if (f.normal().dot(d) < 0.0 && z >= f.v[0].z() && z <= f.v[3].z())
        return make_hit(wall, t_cross);
    }
    t_in = t_cross;
  }
}

std::array<float, 3> sample_texture(const TexturedSurface& s, const Hit& hit) {
  const Face& f = s.faces[hit.face];
  const double fx = std::clamp(hit.s * f.texels_u - 0.5, 0.0, f.texels_u - 1.0);
  const double fy = std::clamp(hit.tv * f.texels_v - 0.5, 0.0, f.texels_v - 1.0);
  const auto x0 = static_cast<std::uint32_t>(fx);
  const auto y0 = static_cast<std::uint32_t>(fy);
  const std::uint32_t x1 = std::min(x0 + 1, f.texels_u - 1);
  const std::uint32_t y1 = std::min(y0 + 1, f.texels_v - 1);
  const double ax = fx - x0, ay = fy - y0;
  auto texel = [&](std::uint32_t u, std::uint32_t w, int c) {
    return static_cast<double>(
        s.texel_rgb[(f.offset + std::uint64_t{w} * f.texels_u + u) * 3 + c]);
  };
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double a = std::lerp(texel(x0, y0, c), texel(x1, y0, c), ax);
    const double b = std::lerp(texel(x0, y1, c), texel(x1, y1, c), ax);
    out[c] = static_cast<float>(std::lerp(a, b, ay));
  }
  return out;
}

Eigen::Vector3d camera_origin(const TexturedSurface& s, const PanoCamera& cam) {
  const TileFrame fr = s.frame();
  const double e = fr.east_of_lon(cam.lon), n = fr.north_of_lat(cam.lat);
  if (!(e >= 0.0 && n >= 0.0 && e < fr.extent_east() && n < fr.extent_north()))
    throw OutOfBounds("pano_project: camera (" + std::to_string(cam.lat) + ", " +
                      std::to_string(cam.lon) + ") outside tile");
  return {e, n, s.ground.height_at(e, n) + cam.height_above_ground};
}

Raster panorama_edges(const Raster& rgb, const Raster& sky,
                      const RenderOptions& options) {
  Raster edge = extract_edges(rgb, options.canny_low, options.canny_high, true);
  const int w = rgb.width(), h = rgb.height();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!sky.u8_at(u, v) || !edge.u8_at(u, v)) continue;
      bool rim = false;
      for (int j = -1; j <= 1 && !rim; ++j)
        for (int i = -1; i <= 1 && !rim; ++i) {
          const int x = (u + i + w) % w, y = v + j;
          rim = y >= 0 && y < h && !sky.u8_at(x, y);
        }
      if (!rim) edge.u8_at(u, v) = 0;
    }
  return edge;
}

PanoramaBundle render_panorama(const TexturedSurface& s, const PanoCamera& cam,
                               const RenderOptions& options) {
  cam.validate();
  const Eigen::Vector3d origin = camera_origin(s, cam);
  {
    const TileFrame fr = s.frame();
    const int cx = fr.cell_x(origin.x()), cy = fr.cell_y(origin.y());
    if (s.field.valid_at(cx, cy) && origin.z() < s.field.at(cx, cy))
      throw OriginBelowSurface("pano_project.render_panorama: camera inside "
                               "geometry at cell (" + std::to_string(cx) + ", " +
                               std::to_string(cy) + ")");
  }
  const int w = cam.width, h = cam.height;
  PanoramaBundle b;
  b.camera = cam;
  b.rgb = Raster::u8(w, h, 3);
  b.depth = Raster::f32(w, h, 1);
  b.semantic = Raster::u8(w, h, 1);
  b.sky_mask = Raster::u8(w, h, 1);

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t r0, std::size_t r1) {
    for (int v = static_cast<int>(r0); v < static_cast<int>(r1); ++v) {
      for (int u = 0; u < w; ++u) {
        const Eigen::Vector3d dir = pixel_to_ray(cam, u, v);
        const std::optional<Hit> hit = raycast(s, origin, dir);
        if (!hit) {
          for (int c = 0; c < 3; ++c) b.rgb.u8_at(u, v, c) = kSkyColor[c];
          b.depth.f32_at(u, v) = std::numeric_limits<float>::infinity();
          b.semantic.u8_at(u, v) = kSky;
          b.sky_mask.u8_at(u, v) = 1;
          continue;
        }
        const auto rgb = sample_texture(s, *hit);
        for (int c = 0; c < 3; ++c)
          b.rgb.u8_at(u, v, c) = static_cast<std::uint8_t>(
              std::lround(std::clamp(rgb[c], 0.0f, 255.0f)));
        b.depth.f32_at(u, v) = static_cast<float>(hit->t);
        b.semantic.u8_at(u, v) = s.faces[hit->face].building ? kBuilding : kGround;
      }
    }
  });

  b.edge = panorama_edges(b.rgb, b.sky_mask, options);
  return b;
}

void write_camera(const PanoCamera& cam, const fs::path& path) {
  nlohmann::ordered_json j;
  j["lat"] = cam.lat;
  j["lon"] = cam.lon;
  j["height_m"] = cam.height_above_ground;
  j["heading_deg"] = cam.heading;
  j["width"] = cam.width;
  j["height"] = cam.height;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("pano_project: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PanoCamera read_camera(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("pano_project: cannot open " + path.string());
  PanoCamera cam;
  try {
    nlohmann::json j;
    in >> j;
    cam.lat = j.at("lat").get<double>();
    cam.lon = j.at("lon").get<double>();
    cam.height_above_ground = j.at("height_m").get<double>();
    cam.heading = j.at("heading_deg").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("pano_project: " + path.string() + ": " + e.what());
  }
  cam.validate();
  return cam;
}

void write_bundle(const PanoramaBundle& b, const fs::path& dir,
                  const std::string& stem) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("pano_project: cannot create " + dir.string());
  write_raster(b.rgb, dir / (stem + ".rgb.png"));
  write_raster(b.depth, dir / (stem + ".depth.pfm"));
  write_raster(b.semantic, dir / (stem + ".sem.png"));
  write_raster(b.sky_mask, dir / (stem + ".sky.png"));
  write_raster(b.edge, dir / (stem + ".edge.png"));
  write_camera(b.camera, dir / (stem + ".cam.json"));
}

PanoramaBundle read_bundle(const fs::path& dir, const std::string& stem) {
  PanoramaBundle b;
  b.rgb = read_raster(dir / (stem + ".rgb.png"), RasterFormat::kPng8);
  b.depth = read_raster(dir / (stem + ".depth.pfm"), RasterFormat::kPfm32);
  b.semantic = read_raster(dir / (stem + ".sem.png"), RasterFormat::kPng8);
  b.sky_mask = read_raster(dir / (stem + ".sky.png"), RasterFormat::kPng8);
  b.edge = read_raster(dir / (stem + ".edge.png"), RasterFormat::kPng8);
  b.camera = read_camera(dir / (stem + ".cam.json"));
  b.validate();
  return b;
}

}  // namespace crossview
