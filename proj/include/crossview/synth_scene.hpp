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

#ifndef CROSSVIEW_SYNTH_SCENE_HPP_
#define CROSSVIEW_SYNTH_SCENE_HPP_

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossview/geometry_refine.hpp"
#include "crossview/panorama.hpp"
#include "crossview/raster.hpp"
#include "crossview/texture_fusion.hpp"

namespace crossview {

using Rgb = std::array<double, 3>;

struct SceneBox {
  double east = 0.0;   // footprint center, meters in the tile frame
  double north = 0.0;
  double width = 10.0;   // along east before yaw
  double depth = 10.0;   // along north before yaw
  double height = 10.0;  // above the ground plane at the center
  double yaw_deg = 0.0;  // counter-clockwise from east
  Rgb roof_color{180, 90, 70};
  Rgb wall_color{200, 190, 170};
};

struct SceneView {
  int id = 0;
  double off_nadir_deg = 0.0;
  double azimuth_deg = 0.0;  // of the satellite seen from the ground, from north
  Rgb gain{1, 1, 1};
  Rgb bias{0, 0, 0};
  double rpc_perturbation = 1e-3;  // bound on the cubic lat/lon coefficients
};

struct SceneCamera {
  std::string name;
  double east = 0.0;
  double north = 0.0;
  double heading_deg = 0.0;
};

struct SceneSpec {
  double tile_m = 64.0;
  double gsd = 0.5;
  double origin_lat = 22.3;  // north-west corner
  double origin_lon = 114.17;
  double plane_a = 0.0;  // z = a east + b north + c
  double plane_b = 0.0;
  double plane_c = 5.0;
  double ground_noise_sigma = 0.0;
  Rgb ground_color{110, 120, 95};
  std::uint64_t seed = 1;
  double image_gsd = 0.5;
  int pano_width = 1024;
  int pano_height = 512;
  std::vector<SceneBox> boxes;
  std::vector<SceneView> views;
  std::vector<SceneCamera> cameras;

  int raster_size() const;
  double ground_at(double east, double north) const {
    return plane_a * east + plane_b * north + plane_c;
  }
  double box_top(const SceneBox& b) const { return ground_at(b.east, b.north) + b.height; }
  GeoRef georef() const;
  void validate() const;
};

// About 64 m square at 0.5 m, flat ground, three grid-aligned boxes, four
// views and three street-level cameras.
SceneSpec default_scene();

SceneSpec read_scene(const std::filesystem::path& json);
void write_scene(const SceneSpec& spec, const std::filesystem::path& json);

struct SyntheticScene {
  SceneSpec spec;
  HeightField height;
  FootprintMask footprint;
  std::vector<SatelliteView> views;
};

// Height field (noisy ground, exact box tops), footprint mask and rendered
// views with their RPCs. Bit-deterministic for a fixed spec.
SyntheticScene generate(const SceneSpec& spec);

// Synthetic camera for one view.
RpcModel scene_rpc(const SceneSpec& spec, const SceneView& view);

// Surface radiance at a tile-frame point on the ground or a box.
Rgb ground_radiance(const SceneSpec& spec, double east, double north);

struct OracleHit {
  double t = 0.0;
  bool building = false;
  Rgb color{};
};

// Analytic intersection with the ground plane (inside the tile) and the
// boxes; nullopt is sky.
std::optional<OracleHit> oracle_raycast(const SceneSpec& spec,
                                        const Eigen::Vector3d& origin,
                                        const Eigen::Vector3d& dir);

// Street-level camera for a scene camera, 2.5 m above the true ground.
PanoCamera scene_camera(const SceneSpec& spec, const SceneCamera& camera);

// Oracle panorama. The origin is the camera's tile-frame position with z
// from `origin_z` when given, else the true ground plus height above ground.
PanoramaBundle oracle_panorama(const SceneSpec& spec, const PanoCamera& camera,
                               std::optional<double> origin_z = std::nullopt,
                               const RenderOptions& options = {});

}  // namespace crossview

#endif  // CROSSVIEW_SYNTH_SCENE_HPP_
