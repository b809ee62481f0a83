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

#ifndef CROSSVIEW_SURFACE_HPP_
#define CROSSVIEW_SURFACE_HPP_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "crossview/geometry_refine.hpp"
#include "crossview/raster.hpp"
#include "json.hpp"

namespace crossview {

enum class FaceKind : std::uint8_t { kTop = 0, kWall = 1 };

// Planar rectangular quad in the tile's ENU frame (meters). Vertices run
// v0 -> v1 -> v2 -> v3 with v1 - v0 the texel u axis and v3 - v0 the texel v
// axis; (v1 - v0) x (v3 - v0) is the outward normal.
struct Face {
  FaceKind kind = FaceKind::kTop;
  std::array<Eigen::Vector3d, 4> v;
  std::uint32_t texels_u = 0;
  std::uint32_t texels_v = 0;
  std::uint64_t offset = 0;  // first texel in the atlas
  int cell_x = 0;            // top: its cell; wall: the higher cell
  int cell_y = 0;
  bool building = false;

  Eigen::Vector3d axis_u() const { return v[1] - v[0]; }
  Eigen::Vector3d axis_v() const { return v[3] - v[0]; }
  Eigen::Vector3d normal() const { return axis_u().cross(axis_v()).normalized(); }
  Eigen::Vector3d centroid() const { return 0.5 * (v[0] + v[2]); }
  std::uint64_t texel_count() const {
    return static_cast<std::uint64_t>(texels_u) * texels_v;
  }
  // s, t in [0, 1] along the u and v axes.
  Eigen::Vector3d point_at(double s, double t) const {
    return v[0] + s * axis_u() + t * axis_v();
  }
  Eigen::Vector3d texel_center(std::uint32_t u, std::uint32_t w) const {
    return point_at((u + 0.5) / texels_u, (w + 0.5) / texels_v);
  }
};

// 2.5D quad mesh over a height field: one horizontal quad per valid cell and
// one vertical wall quad per cell edge with a height discontinuity.
struct TexturedSurface {
  HeightField field;
  Raster building_cells;  // u8 {0,1}, same size as the field
  GroundPlane ground;
  double wall_threshold = 0.0;
  std::vector<Face> faces;

  // Face lookup for ray traversal; -1 means none.
  std::vector<std::int32_t> top_face;  // width * height
  std::vector<std::int32_t> wall_x;    // (width + 1) * height, line x = i
  std::vector<std::int32_t> wall_y;    // width * (height + 1), line y = j

  // Per-texel fused color (RGB, [0, 255]) and number of contributing views.
  std::vector<float> texel_rgb;
  std::vector<std::uint16_t> source_count;

  float max_height = 0.0f;

  TileFrame frame() const { return field.frame(); }
  std::uint64_t texel_count() const;
  std::int32_t top_at(int x, int y) const {
    return top_face[static_cast<std::size_t>(y) * field.width() + x];
  }
  std::int32_t wall_x_at(int line, int row) const {
    return wall_x[static_cast<std::size_t>(row) * (field.width() + 1) + line];
  }
  std::int32_t wall_y_at(int col, int line) const {
    return wall_y[static_cast<std::size_t>(line) * field.width() + col];
  }
};

// Untextured mesh; texel resolution gsd/2 on tops and walls. Cells flagged
// in `building_cells` (if non-empty) mark their tops and the walls they
// raise as building faces.
TexturedSurface build_surface_mesh(const HeightField& hf,
                                   double wall_threshold = 0.0,
                                   const Raster& building_cells = {},
                                   const GroundPlane& ground = {});

// Directory layout: faces.bin, atlas.pfm, count.pfm, height.pfm (+ sidecar),
// building.png, manifest.json. `extra` is merged into the manifest.
void save_surface(const TexturedSurface& surface,
                  const std::filesystem::path& dir,
                  const nlohmann::ordered_json& extra = {});
TexturedSurface load_surface(const std::filesystem::path& dir);

inline constexpr std::uint32_t kAtlasWidth = 1024;
inline constexpr char kFacesMagic[8] = {'C', 'V', 'F', 'A', 'C', 'E', 'S', '1'};
// Bytes per face record: kind u8, 12 x f64 vertices, 2 x u32 texel dims,
// u64 atlas offset; little-endian, packed.
inline constexpr std::size_t kFaceRecordSize = 1 + 12 * 8 + 2 * 4 + 8;

}  // namespace crossview

#endif  // CROSSVIEW_SURFACE_HPP_
