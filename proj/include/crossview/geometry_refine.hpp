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

#ifndef CROSSVIEW_GEOMETRY_REFINE_HPP_
#define CROSSVIEW_GEOMETRY_REFINE_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crossview/raster.hpp"

namespace crossview {

// Building/non-building classification of a height field's cells
// (1 = building). Ingested, never computed here.
struct FootprintMask {
  Raster raster;  // 1 channel u8, values in {0, 1}
  GeoRef georef;

  bool building(int x, int y) const { return raster.u8_at(x, y) != 0; }
  void validate() const;
  void validate_against(const HeightField& hf) const;
};

FootprintMask read_footprint(const std::filesystem::path& png);
void write_footprint(const FootprintMask& mask, const std::filesystem::path& png);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// Closed ring without a repeated closing vertex. Coordinates are pixel
// corners: pixel (i, j) covers [i, i+1] x [j, j+1].
using Ring = std::vector<Point2>;

struct Contour {
  int id = 0;  // scanline order of the component's first pixel
  Ring points;
};

struct BuildingPolygon {
  int id = 0;
  Ring vertices;
  double dominant_angle = 0.0;  // radians, in [0, pi/2)
  bool regularized = true;      // false: simplified ring passed through
};

// z = a * east + b * north + c, all in meters in the tile frame.
struct GroundPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double inlier_rms = 0.0;
  std::size_t inliers = 0;

  double height_at(double east, double north) const {
    return a * east + b * north + c;
  }
};

// Signed shoelace area in pixel coordinates. Rings produced here are
// oriented so this is positive ("counter-clockwise" with x right, y down).
double signed_area(const Ring& ring);
bool is_simple(const Ring& ring);
bool point_in_ring(const Ring& ring, double x, double y);

// Outer boundary of every 4-connected building component with at least
// `min_pixels` pixels, traced along pixel edges.
std::vector<Contour> trace_boundaries(const FootprintMask& mask,
                                      int min_pixels = 9);

// Douglas-Peucker on a closed ring.
Ring simplify_polygon(const Ring& contour, double epsilon);

struct RegularizeOptions {
  double angle_step_deg = 0.5;
  double angle_window_deg = 10.0;
  double max_area_change = 0.15;
};

// Snaps every edge to the dominant orientation or its perpendicular.
// Throws RegularizationRejected when the area changes by more than
// max_area_change.
BuildingPolygon regularize_polygon(const Ring& polygon, int id = 0,
                                   const RegularizeOptions& options = {});

// Re-fits the offset of every edge of a regularized polygon to the traced
// boundary it came from: each boundary segment votes, by length, for the
// nearest edge, and the edge line moves to the mean of its voters. Angles are
// kept. Simplification keeps the outer corners of staircase edges, so the
// refit removes that outward bias. Returns `polygon` unchanged when the result
// would not be simple or would move the area by more than max_area_change.
BuildingPolygon refit_to_boundary(const BuildingPolygon& polygon,
                                  const Ring& boundary,
                                  const RegularizeOptions& options = {});

// Dominant edge orientation in [0, pi/2) scored on the angle grid.
double dominant_angle(const Ring& polygon, const RegularizeOptions& options = {});

struct RansacOptions {
  double inlier_threshold = 0.5;  // meters
  int iterations = 500;
  std::uint64_t seed = 7;
  std::size_t min_samples = 100;
};

GroundPlane fit_ground_plane(const HeightField& hf, const FootprintMask& mask,
                             const RansacOptions& options = {});

// Cells (by pixel center) covered by each polygon: 0 = none, id + 1 otherwise.
std::vector<int> rasterize_polygons(const std::vector<BuildingPolygon>& polygons,
                                    int width, int height);

HeightField refine_heightfield(const HeightField& hf,
                               const std::vector<BuildingPolygon>& polygons,
                               const GroundPlane& plane,
                               const FootprintMask& mask);

struct RefineOptions {
  double simplify_epsilon = 2.0;
  int min_component_pixels = 9;
  RegularizeOptions regularize;
  RansacOptions ransac;
};

struct RefineResult {
  HeightField refined;
  std::vector<BuildingPolygon> polygons;
  GroundPlane plane;
  Raster building_cells;  // u8 {0,1}: cells covered by a polygon
};

// trace -> simplify -> regularize (pass-through on rejection) -> refit to
// the traced boundary -> plane fit -> refine.
RefineResult refine_geometry(const HeightField& hf, const FootprintMask& mask,
                             const RefineOptions& options = {});

// {"buildings":[{"id":..,"angle_deg":..,"vertices":[[x,y],..]}]}
void write_polygons(const std::vector<BuildingPolygon>& polygons,
                    const std::filesystem::path& path);
std::vector<BuildingPolygon> read_polygons(const std::filesystem::path& path);

void write_plane(const GroundPlane& plane, const std::filesystem::path& path);
GroundPlane read_plane(const std::filesystem::path& path);

}  // namespace crossview

#endif  // CROSSVIEW_GEOMETRY_REFINE_HPP_
