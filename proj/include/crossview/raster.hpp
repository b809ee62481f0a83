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

#ifndef CROSSVIEW_RASTER_HPP_
#define CROSSVIEW_RASTER_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "crossview/error.hpp"

namespace crossview {

enum class PixelType { kU8, kF32 };
enum class RasterFormat { kPng8, kPfm32 };

// Row-major, interleaved-channel image. Row 0 is the top (northmost) row.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, PixelType type);

  static Raster u8(int width, int height, int channels, std::uint8_t fill = 0);
  static Raster f32(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  PixelType type() const { return type_; }
  std::size_t size() const {
    return static_cast<std::size_t>(width_) * height_ * channels_;
  }
  bool empty() const { return size() == 0; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool same_shape(const Raster& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::uint8_t& u8_at(int x, int y, int c = 0) { return u8_[index(x, y, c)]; }
  std::uint8_t u8_at(int x, int y, int c = 0) const {
    return u8_[index(x, y, c)];
  }
  float& f32_at(int x, int y, int c = 0) { return f32_[index(x, y, c)]; }
  float f32_at(int x, int y, int c = 0) const { return f32_[index(x, y, c)]; }

  // Type-erased read, for code that accepts either pixel type.
  double value(int x, int y, int c = 0) const {
    return type_ == PixelType::kU8 ? u8_[index(x, y, c)]
                                   : static_cast<double>(f32_[index(x, y, c)]);
  }

  std::span<std::uint8_t> u8_data() { return u8_; }
  std::span<const std::uint8_t> u8_data() const { return u8_; }
  std::span<float> f32_data() { return f32_; }
  std::span<const float> f32_data() const { return f32_; }

  bool operator==(const Raster& o) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  PixelType type_ = PixelType::kU8;
  std::vector<std::uint8_t> u8_;
  std::vector<float> f32_;
};

// Bitwise comparison: NaN payloads must match, +0 and -0 differ.
bool bitwise_equal(const Raster& a, const Raster& b);

// Meters per degree of latitude and longitude at a latitude (WGS84).
struct MetersPerDegree {
  double lat = 0.0;
  double lon = 0.0;
};
MetersPerDegree meters_per_degree(double lat_deg);

struct GeoRef {
  double origin_lat = 0.0;  // latitude of the top-left raster corner
  double origin_lon = 0.0;
  double gsd = 1.0;  // meters per pixel
  std::optional<int> utm_zone;

  void validate() const;
  bool operator==(const GeoRef&) const = default;
};

// Local tangent frame of a georeferenced tile. East/north are meters with
// the origin at the south-west corner, so every point of the tile has
// non-negative coordinates. Geodetic conversion is linearized at the tile
// origin (WGS84 radii of curvature), which is exact in both directions and
// accurate to centimeters across a few kilometers.
class TileFrame {
 public:
  TileFrame() = default;
  TileFrame(GeoRef georef, int width, int height);

  const GeoRef& georef() const { return georef_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double gsd() const { return georef_.gsd; }
  double extent_east() const { return width_ * georef_.gsd; }
  double extent_north() const { return height_ * georef_.gsd; }

  double meters_per_deg_lat() const { return m_per_deg_lat_; }
  double meters_per_deg_lon() const { return m_per_deg_lon_; }

  // Fractional pixel coordinates (pixel (i, j) covers [i, i+1) x [j, j+1)).
  double east_of(double px) const { return px * georef_.gsd; }
  double north_of(double py) const { return (height_ - py) * georef_.gsd; }
  double px_of(double east) const { return east / georef_.gsd; }
  double py_of(double north) const { return height_ - north / georef_.gsd; }

  // Cell containing an ENU point; may be outside the raster.
  int cell_x(double east) const {
    return static_cast<int>(std::floor(east / georef_.gsd));
  }
  int cell_y(double north) const {
    return static_cast<int>(std::floor(height_ - north / georef_.gsd));
  }

  double lat_of(double north) const;
  double lon_of(double east) const;
  double north_of_lat(double lat) const;
  double east_of_lon(double lon) const;

 private:
  GeoRef georef_;
  int width_ = 0;
  int height_ = 0;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lon_ = 0.0;
};

inline constexpr float kNoData = std::numeric_limits<float>::quiet_NaN();

struct HeightField {
  Raster raster;  // 1 channel, f32, meters
  GeoRef georef;
  float nodata = kNoData;

  int width() const { return raster.width(); }
  int height() const { return raster.height(); }
  float at(int x, int y) const { return raster.f32_at(x, y); }
  bool is_nodata(float v) const {
    return std::isnan(nodata) ? std::isnan(v) : v == nodata;
  }
  bool valid_at(int x, int y) const { return !is_nodata(at(x, y)); }
  TileFrame frame() const { return {georef, width(), height()}; }

  void validate() const;
};

Raster read_raster(const std::filesystem::path& path, RasterFormat format);
// Format chosen from the extension (.png / .pfm).
Raster read_raster(const std::filesystem::path& path);
void write_raster(const Raster& raster, const std::filesystem::path& path);

// `<stem>.geo.json` next to a raster.
std::filesystem::path geo_sidecar_path(const std::filesystem::path& raster);
GeoRef read_georef(const std::filesystem::path& sidecar);
void write_georef(const GeoRef& georef, const std::filesystem::path& sidecar);

HeightField read_heightfield(const std::filesystem::path& pfm);
void write_heightfield(const HeightField& hf, const std::filesystem::path& pfm);

// Per-channel bilinear interpolation at fractional pixel coordinates.
std::vector<double> bilinear_sample(const Raster& raster, double x, double y);
// Allocation-free variant; `out` must hold raster.channels() values.
void bilinear_sample_into(const Raster& raster, double x, double y,
                          std::span<double> out);

}  // namespace crossview

#endif  // CROSSVIEW_RASTER_HPP_
