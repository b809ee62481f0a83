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

#ifndef CROSSVIEW_PANORAMA_HPP_
#define CROSSVIEW_PANORAMA_HPP_

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "crossview/edges.hpp"
#include "crossview/raster.hpp"
#include "crossview/surface.hpp"

namespace crossview {

struct PanoCamera {
  double lat = 0.0;
  double lon = 0.0;
  double height_above_ground = 2.5;  // meters
  double heading = 0.0;              // degrees clockwise from north
  int width = 1024;
  int height = 512;

  void validate() const;
};

enum SemanticLabel : std::uint8_t {
  kGround = 0,
  kBuilding = 1,
  kSky = 2,
  kVegetation = 3,  // reserved
};

inline constexpr std::array<std::uint8_t, 3> kSkyColor = {135, 206, 235};

struct PanoramaBundle {
  Raster rgb;        // u8 x3
  Raster depth;      // f32, meters, +inf for sky
  Raster semantic;   // u8 SemanticLabel
  Raster sky_mask;   // u8 {0,1}
  Raster edge;       // u8 {0,255}
  PanoCamera camera;

  void validate() const;
};

// Equirectangular: azimuth = heading + 360 (u + 0.5) / width, elevation =
// 90 - 180 (v + 0.5) / height. Returns a unit (east, north, up) vector.
Eigen::Vector3d pixel_to_ray(const PanoCamera& camera, double u, double v);

struct Hit {
  int face = -1;
  double t = 0.0;  // meters along the unit ray
  FaceKind kind = FaceKind::kTop;
  double s = 0.0;   // position along the face's u axis, [0, 1]
  double tv = 0.0;  // position along the face's v axis, [0, 1]
};

// Grid traversal of the surface; nullopt is sky.
std::optional<Hit> raycast(const TexturedSurface& surface,
                           const Eigen::Vector3d& origin,
                           const Eigen::Vector3d& dir);

// Bilinear lookup in the face's texel grid.
std::array<float, 3> sample_texture(const TexturedSurface& surface,
                                    const Hit& hit);

// Camera position in the tile frame: ground plane height plus
// height_above_ground.
Eigen::Vector3d camera_origin(const TexturedSurface& surface,
                              const PanoCamera& camera);

struct RenderOptions {
  double canny_low = kDefaultCannyLow;
  double canny_high = kDefaultCannyHigh;
};

// Canny on the RGB raster, wrapping in azimuth, with edges inside the sky
// dropped except on sky pixels that touch geometry.
Raster panorama_edges(const Raster& rgb, const Raster& sky_mask,
                      const RenderOptions& options = {});

PanoramaBundle render_panorama(const TexturedSurface& surface,
                               const PanoCamera& camera,
                               const RenderOptions& options = {});

// `<dir>/<stem>.{rgb.png,depth.pfm,sem.png,sky.png,edge.png,cam.json}`
void write_bundle(const PanoramaBundle& bundle, const std::filesystem::path& dir,
                  const std::string& stem);
PanoramaBundle read_bundle(const std::filesystem::path& dir,
                           const std::string& stem);
void write_camera(const PanoCamera& camera, const std::filesystem::path& path);
PanoCamera read_camera(const std::filesystem::path& path);

}  // namespace crossview

#endif  // CROSSVIEW_PANORAMA_HPP_
