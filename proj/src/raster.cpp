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

#include "crossview/raster.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

Raster::Raster(int width, int height, int channels, PixelType type)
    : width_(width), height_(height), channels_(channels), type_(type) {
  if (width < 1 || height < 1)
    throw ValidationError("raster: width and height must be >= 1");
  if (channels != 1 && channels != 3)
    throw ValidationError("raster: channels must be 1 or 3");
  if (type == PixelType::kU8)
    u8_.assign(size(), 0);
  else
    f32_.assign(size(), 0.0f);
}

Raster Raster::u8(int width, int height, int channels, std::uint8_t fill) {
  Raster r(width, height, channels, PixelType::kU8);
  std::fill(r.u8_.begin(), r.u8_.end(), fill);
  return r;
}

Raster Raster::f32(int width, int height, int channels, float fill) {
  Raster r(width, height, channels, PixelType::kF32);
  std::fill(r.f32_.begin(), r.f32_.end(), fill);
  return r;
}

bool Raster::operator==(const Raster& o) const {
  return width_ == o.width_ && height_ == o.height_ &&
         channels_ == o.channels_ && type_ == o.type_ && u8_ == o.u8_ &&
         f32_ == o.f32_;
}

bool bitwise_equal(const Raster& a, const Raster& b) {
  if (!a.same_shape(b) || a.type() != b.type()) return false;
  if (a.type() == PixelType::kU8)
    return std::ranges::equal(a.u8_data(), b.u8_data());
  return std::memcmp(a.f32_data().data(), b.f32_data().data(),
                     a.size() * sizeof(float)) == 0;
}

void GeoRef::validate() const {
  if (!(gsd > 0.0) || !std::isfinite(gsd))
    throw ValidationError("georef: gsd must be > 0");
  if (!(std::abs(origin_lat) <= 90.0))
    throw ValidationError("georef: |origin_lat| must be <= 90");
  if (!(std::abs(origin_lon) <= 180.0))
    throw ValidationError("georef: |origin_lon| must be <= 180");
}

MetersPerDegree meters_per_degree(double lat_deg) {
  // WGS84 meridional (M) and prime-vertical (N) radii of curvature.
  constexpr double a = 6378137.0;
  constexpr double e2 = 6.69437999014e-3;
  const double phi = lat_deg * std::numbers::pi / 180.0;
  const double s = std::sin(phi);
  const double w = std::sqrt(1.0 - e2 * s * s);
  const double m = a * (1.0 - e2) / (w * w * w);
  const double n = a / w;
  return {m * std::numbers::pi / 180.0,
          n * std::cos(phi) * std::numbers::pi / 180.0};
}

TileFrame::TileFrame(GeoRef georef, int width, int height)
    : georef_(std::move(georef)), width_(width), height_(height) {
  georef_.validate();
  const MetersPerDegree mpd = meters_per_degree(georef_.origin_lat);
  m_per_deg_lat_ = mpd.lat;
  m_per_deg_lon_ = mpd.lon;
}

double TileFrame::lat_of(double north) const {
  return georef_.origin_lat + (north - extent_north()) / m_per_deg_lat_;
}
double TileFrame::lon_of(double east) const {
  return georef_.origin_lon + east / m_per_deg_lon_;
}
double TileFrame::north_of_lat(double lat) const {
  return (lat - georef_.origin_lat) * m_per_deg_lat_ + extent_north();
}
double TileFrame::east_of_lon(double lon) const {
  return (lon - georef_.origin_lon) * m_per_deg_lon_;
}

void HeightField::validate() const {
  if (raster.channels() != 1 || raster.type() != PixelType::kF32)
    throw ValidationError("heightfield: raster must be 1-channel f32");
  georef.validate();
  for (float v : raster.f32_data())
    if (!is_nodata(v) && !std::isfinite(v))
      throw ValidationError("heightfield: non-finite height value");
}

// ---------------------------------------------------------------------------
// PNG

namespace {

Raster read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw FormatError("read_raster: not a PNG file: " + path.string() + " (" +
                      image.message + ")");
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster r = Raster::u8(static_cast<int>(image.width),
                        static_cast<int>(image.height), color ? 3 : 1);
  if (!png_image_finish_read(&image, nullptr, r.u8_data().data(), 0,
                             nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("read_raster: corrupt PNG " + path.string() + " (" +
                      msg + ")");
  }
  return r;
}

void write_png(const Raster& r, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(r.width());
  image.height = static_cast<png_uint_32>(r.height());
  image.format = r.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  // Encode to memory first so a failing destination is reported as IoError
  // rather than a libpng-internal message.
  png_alloc_size_t bytes = 0;
  if (!png_image_write_to_memory(&image, nullptr, &bytes, 0,
                                 r.u8_data().data(), 0, nullptr))
    throw IoError("write_raster: PNG encode failed for " + path.string());
  std::vector<char> buf(bytes);
  if (!png_image_write_to_memory(&image, buf.data(), &bytes, 0,
                                 r.u8_data().data(), 0, nullptr))
    throw IoError("write_raster: PNG encode failed for " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_raster: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write_raster: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PFM

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

Raster read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_raster: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])))
      ++pos;
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      ++pos;
    return bytes.substr(start, pos - start);
  };

  const std::string magic = next_token();
  int channels = 0;
  if (magic == "Pf")
    channels = 1;
  else if (magic == "PF")
    channels = 3;
  else
    throw FormatError("read_raster: bad PFM magic in " + path.string());

  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    scale = std::stod(next_token());
  } catch (const std::exception&) {
    throw FormatError("read_raster: malformed PFM header in " + path.string());
  }
  if (width < 1 || height < 1 || scale == 0.0)
    throw FormatError("read_raster: invalid PFM header in " + path.string());
  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size())
    throw FormatError("read_raster: PFM payload missing in " + path.string());
  ++pos;

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos != count * sizeof(float))
    throw FormatError("read_raster: PFM payload length disagrees with header "
                      "dimensions in " + path.string());

  const bool file_le = scale < 0.0;
  const bool host_le = std::endian::native == std::endian::little;
  Raster r = Raster::f32(width, height, channels);
  auto data = r.f32_data();
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    // PFM stores the bottom row first.
    const char* src = bytes.data() + pos + static_cast<std::size_t>(y) * row * 4;
    float* dst = data.data() + static_cast<std::size_t>(height - 1 - y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, src + i * 4, 4);
      if (file_le != host_le) bits = byteswap32(bits);
      std::memcpy(dst + i, &bits, 4);
    }
  }
  return r;
}

void write_pfm(const Raster& r, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_raster: cannot open " + path.string());
  out << (r.channels() == 3 ? "PF" : "Pf") << '\n'
      << r.width() << ' ' << r.height() << '\n'
      << "-1.0\n";
  const bool host_le = std::endian::native == std::endian::little;
  const std::size_t row = static_cast<std::size_t>(r.width()) * r.channels();
  std::vector<char> buf(row * 4);
  auto data = r.f32_data();
  for (int y = r.height() - 1; y >= 0; --y) {
    const float* src = data.data() + static_cast<std::size_t>(y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, src + i, 4);
      if (!host_le) bits = byteswap32(bits);
      std::memcpy(buf.data() + i * 4, &bits, 4);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write_raster: write failed for " + path.string());
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::ranges::transform(e, e.begin(),
                         [](unsigned char c) { return std::tolower(c); });
  return e;
}

}  // namespace

Raster read_raster(const fs::path& path, RasterFormat format) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw IoError("read_raster: missing or unreadable file " + path.string());
  return format == RasterFormat::kPng8 ? read_png(path) : read_pfm(path);
}

Raster read_raster(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_raster(path, RasterFormat::kPng8);
  if (ext == ".pfm") return read_raster(path, RasterFormat::kPfm32);
  throw FormatError("read_raster: unsupported extension " + path.string());
}

void write_raster(const Raster& raster, const fs::path& path) {
  if (raster.empty()) throw ValidationError("write_raster: empty raster");
  const std::string ext = lower_ext(path);
  if (raster.type() == PixelType::kU8) {
    if (ext != ".png")
      throw FormatError("write_raster: u8 rasters are written as .png: " +
                        path.string());
    write_png(raster, path);
  } else {
    if (ext != ".pfm")
      throw FormatError("write_raster: f32 rasters are written as .pfm: " +
                        path.string());
    write_pfm(raster, path);
  }
}

fs::path geo_sidecar_path(const fs::path& raster) {
  fs::path p = raster;
  p.replace_extension(".geo.json");
  return p;
}

GeoRef read_georef(const fs::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw IoError("read_georef: cannot open " + sidecar.string());
  nlohmann::json j;
  try {
    in >> j;
    GeoRef g;
    g.origin_lat = j.at("origin_lat").get<double>();
    g.origin_lon = j.at("origin_lon").get<double>();
    g.gsd = j.at("gsd_m").get<double>();
    if (j.contains("utm_zone") && !j["utm_zone"].is_null())
      g.utm_zone = j["utm_zone"].get<int>();
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("read_georef: " + sidecar.string() + ": " + e.what());
  }
}

void write_georef(const GeoRef& g, const fs::path& sidecar) {
  nlohmann::ordered_json j;
  j["origin_lat"] = g.origin_lat;
  j["origin_lon"] = g.origin_lon;
  j["gsd_m"] = g.gsd;
  j["utm_zone"] = g.utm_zone ? nlohmann::ordered_json(*g.utm_zone)
                             : nlohmann::ordered_json(nullptr);
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw IoError("write_georef: cannot open " + sidecar.string());
  out << j.dump(2) << '\n';
}

HeightField read_heightfield(const fs::path& pfm) {
  HeightField hf;
  hf.raster = read_raster(pfm, RasterFormat::kPfm32);
  hf.georef = read_georef(geo_sidecar_path(pfm));
  hf.validate();
  return hf;
}

void write_heightfield(const HeightField& hf, const fs::path& pfm) {
  write_raster(hf.raster, pfm);
  write_georef(hf.georef, geo_sidecar_path(pfm));
}

void bilinear_sample_into(const Raster& r, double x, double y,
                          std::span<double> out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= r.width() - 1 && y <= r.height() - 1))
    throw OutOfBounds("bilinear_sample: (" + std::to_string(x) + ", " +
                      std::to_string(y) + ") outside raster");
  const int x0 = std::min(static_cast<int>(x), r.width() - 1);
  const int y0 = std::min(static_cast<int>(y), r.height() - 1);
  const int x1 = std::min(x0 + 1, r.width() - 1);
  const int y1 = std::min(y0 + 1, r.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  for (int c = 0; c < r.channels(); ++c) {
    const double v00 = r.value(x0, y0, c);
    const double v10 = r.value(x1, y0, c);
    const double v01 = r.value(x0, y1, c);
    const double v11 = r.value(x1, y1, c);
    // std::lerp is exact at the endpoints and bounded by them.
    const double top = std::lerp(v00, v10, fx);
    const double bot = std::lerp(v01, v11, fx);
    out[c] = std::lerp(top, bot, fy);
  }
}

std::vector<double> bilinear_sample(const Raster& raster, double x, double y) {
  std::vector<double> out(raster.channels());
  bilinear_sample_into(raster, x, y, out);
  return out;
}

}  // namespace crossview
