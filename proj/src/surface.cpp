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

#include "crossview/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace crossview {

namespace fs = std::filesystem;

std::uint64_t TexturedSurface::texel_count() const {
  return faces.empty() ? 0 : faces.back().offset + faces.back().texel_count();
}

namespace {

// Grid line coordinates. Every face derives its corners from these so shared
// edges are bit-identical.
struct Grid {
  double gsd;
  int height;
  double x(int i) const { return i * gsd; }
  double y(int j) const { return (height - j) * gsd; }  // north of row line j
};

std::uint32_t wall_rows(double span, double gsd) {
  return std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::ceil(span / (0.5 * gsd) - 1e-9)));
}

}  // namespace

TexturedSurface build_surface_mesh(const HeightField& hf, double wall_threshold,
                                   const Raster& building_cells,
                                   const GroundPlane& ground) {
  hf.validate();
  if (!(wall_threshold >= 0.0))
    throw ValidationError("texture_fusion.build_surface_mesh: wall_threshold "
                          "must be >= 0");
  const int w = hf.width(), h = hf.height();
  if (!building_cells.empty() &&
      (building_cells.width() != w || building_cells.height() != h))
    throw DimMismatch("texture_fusion.build_surface_mesh: building raster size");

  TexturedSurface s;
  s.field = hf;
  s.building_cells =
      building_cells.empty() ? Raster::u8(w, h, 1) : building_cells;
  s.ground = ground;
  s.wall_threshold = wall_threshold;
  s.top_face.assign(static_cast<std::size_t>(w) * h, -1);
  s.wall_x.assign(static_cast<std::size_t>(w + 1) * h, -1);
  s.wall_y.assign(static_cast<std::size_t>(w) * (h + 1), -1);

  const Grid g{hf.georef.gsd, h};
  std::uint64_t offset = 0;
  float max_h = -std::numeric_limits<float>::infinity();
  auto is_building = [&](int x, int y) {
    return s.building_cells.u8_at(x, y) != 0;
  };
  auto push = [&](Face f) {
    f.offset = offset;
    offset += f.texel_count();
    s.faces.push_back(std::move(f));
    return static_cast<std::int32_t>(s.faces.size() - 1);
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!hf.valid_at(x, y)) continue;
      const double z = hf.at(x, y);
      max_h = std::max(max_h, hf.at(x, y));
      Face f;
      f.kind = FaceKind::kTop;
      f.v = {Eigen::Vector3d(g.x(x), g.y(y + 1), z),
             Eigen::Vector3d(g.x(x + 1), g.y(y + 1), z),
             Eigen::Vector3d(g.x(x + 1), g.y(y), z),
             Eigen::Vector3d(g.x(x), g.y(y), z)};
      f.texels_u = 2;
      f.texels_v = 2;
      f.cell_x = x;
      f.cell_y = y;
      f.building = is_building(x, y);
      s.top_face[static_cast<std::size_t>(y) * w + x] = push(std::move(f));
    }
  }

  // Walls on vertical grid lines x = i, between cells (i-1, y) and (i, y).
  for (int y = 0; y < h; ++y) {
    for (int i = 1; i < w; ++i) {
      if (!hf.valid_at(i - 1, y) || !hf.valid_at(i, y)) continue;
      const double zw = hf.at(i - 1, y), ze = hf.at(i, y);
      if (zw == ze || std::abs(zw - ze) <= wall_threshold) continue;
      const double lo = std::min(zw, ze), hi = std::max(zw, ze);
      const double xl = g.x(i), ys = g.y(y + 1), yn = g.y(y);
      Face f;
      f.kind = FaceKind::kWall;
      if (zw > ze) {  // faces east, u axis runs north
        f.v = {Eigen::Vector3d(xl, ys, lo), Eigen::Vector3d(xl, yn, lo),
               Eigen::Vector3d(xl, yn, hi), Eigen::Vector3d(xl, ys, hi)};
        f.cell_x = i - 1;
      } else {  // faces west, u axis runs south
        f.v = {Eigen::Vector3d(xl, yn, lo), Eigen::Vector3d(xl, ys, lo),
               Eigen::Vector3d(xl, ys, hi), Eigen::Vector3d(xl, yn, hi)};
        f.cell_x = i;
      }
      f.cell_y = y;
      f.texels_u = 2;
      f.texels_v = wall_rows(hi - lo, g.gsd);
      f.building = is_building(f.cell_x, f.cell_y);
      s.wall_x[static_cast<std::size_t>(y) * (w + 1) + i] = push(std::move(f));
    }
  }

  // Walls on horizontal grid lines y = j, between rows j-1 (north) and j.
  for (int j = 1; j < h; ++j) {
    for (int x = 0; x < w; ++x) {
      if (!hf.valid_at(x, j - 1) || !hf.valid_at(x, j)) continue;
      const double zn = hf.at(x, j - 1), zs = hf.at(x, j);
      if (zn == zs || std::abs(zn - zs) <= wall_threshold) continue;
      const double lo = std::min(zn, zs), hi = std::max(zn, zs);
      const double yl = g.y(j), xw = g.x(x), xe = g.x(x + 1);
      Face f;
      f.kind = FaceKind::kWall;
      if (zn > zs) {  // faces south, u axis runs east
        f.v = {Eigen::Vector3d(xw, yl, lo), Eigen::Vector3d(xe, yl, lo),
               Eigen::Vector3d(xe, yl, hi), Eigen::Vector3d(xw, yl, hi)};
        f.cell_y = j - 1;
      } else {  // faces north, u axis runs west
        f.v = {Eigen::Vector3d(xe, yl, lo), Eigen::Vector3d(xw, yl, lo),
               Eigen::Vector3d(xw, yl, hi), Eigen::Vector3d(xe, yl, hi)};
        f.cell_y = j;
      }
      f.cell_x = x;
      f.texels_u = 2;
      f.texels_v = wall_rows(hi - lo, g.gsd);
      f.building = is_building(f.cell_x, f.cell_y);
      s.wall_y[static_cast<std::size_t>(j) * w + x] = push(std::move(f));
    }
  }

  s.max_height = std::isfinite(max_h) ? max_h : 0.0f;
  s.texel_rgb.assign(offset * 3, 0.0f);
  s.source_count.assign(offset, 0);
  return s;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

template <class T>
void put_le(std::vector<char>& buf, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(bytes), std::end(bytes));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(bytes), std::end(bytes));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

Raster atlas_raster(const std::vector<float>& values, int channels,
                    std::uint64_t texels) {
  const int width = static_cast<int>(
      std::max<std::uint64_t>(1, std::min<std::uint64_t>(kAtlasWidth, texels)));
  const int height = static_cast<int>(
      std::max<std::uint64_t>(1, (texels + width - 1) / width));
  Raster r = Raster::f32(width, height, channels);
  std::copy(values.begin(), values.end(), r.f32_data().begin());
  return r;
}

}  // namespace

void save_surface(const TexturedSurface& s, const fs::path& dir,
                  const nlohmann::ordered_json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("save_surface: cannot create " + dir.string());

  std::vector<char> buf(kFacesMagic, kFacesMagic + 8);
  put_le<std::uint64_t>(buf, s.faces.size());
  buf.reserve(buf.size() + s.faces.size() * kFaceRecordSize);
  for (const Face& f : s.faces) {
    put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(f.kind));
    for (const auto& v : f.v)
      for (int k = 0; k < 3; ++k) put_le<double>(buf, v[k]);
    put_le<std::uint32_t>(buf, f.texels_u);
    put_le<std::uint32_t>(buf, f.texels_v);
    put_le<std::uint64_t>(buf, f.offset);
  }
  {
    std::ofstream out(dir / "faces.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_surface: cannot write faces.bin");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }

  const std::uint64_t texels = s.texel_count();
  write_raster(atlas_raster(s.texel_rgb, 3, texels), dir / "atlas.pfm");
  std::vector<float> counts(s.source_count.begin(), s.source_count.end());
  write_raster(atlas_raster(counts, 1, texels), dir / "count.pfm");
  write_heightfield(s.field, dir / "height.pfm");
  write_raster(s.building_cells, dir / "building.png");

  nlohmann::ordered_json m;
  m["faces"] = "faces.bin";
  m["face_count"] = s.faces.size();
  m["texel_count"] = texels;
  m["atlas"] = "atlas.pfm";
  m["atlas_width"] = std::min<std::uint64_t>(kAtlasWidth, std::max<std::uint64_t>(1, texels));
  m["counts"] = "count.pfm";
  m["heightfield"] = "height.pfm";
  m["building_cells"] = "building.png";
  m["wall_threshold"] = s.wall_threshold;
  m["ground_plane"] = {{"a", s.ground.a},
                       {"b", s.ground.b},
                       {"c", s.ground.c},
                       {"inlier_rms", s.ground.inlier_rms}};
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("save_surface: cannot write manifest.json");
  out << m.dump(2) << '\n';
}

TexturedSurface load_surface(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw IoError("load_surface: missing " + (dir / "manifest.json").string());
  nlohmann::json m;
  try {
    min >> m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_surface: manifest: " + std::string(e.what()));
  }

  const HeightField hf = read_heightfield(dir / m.value("heightfield", "height.pfm"));
  const Raster building = read_raster(dir / m.value("building_cells", "building.png"));
  GroundPlane ground;
  if (m.contains("ground_plane")) {
    ground.a = m["ground_plane"].value("a", 0.0);
    ground.b = m["ground_plane"].value("b", 0.0);
    ground.c = m["ground_plane"].value("c", 0.0);
    ground.inlier_rms = m["ground_plane"].value("inlier_rms", 0.0);
  }
  // The mesh is a pure function of the field; rebuild it and check the face
  // records against it.
  TexturedSurface s =
      build_surface_mesh(hf, m.value("wall_threshold", 0.0), building, ground);

  std::ifstream fin(dir / m.value("faces", "faces.bin"), std::ios::binary);
  if (!fin) throw IoError("load_surface: missing faces.bin");
  std::string bytes((std::istreambuf_iterator<char>(fin)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFacesMagic, 8) != 0)
    throw FormatError("load_surface: bad faces.bin header");
  const auto count = get_le<std::uint64_t>(bytes.data() + 8);
  if (count != s.faces.size() || bytes.size() != 16 + count * kFaceRecordSize)
    throw FormatError("load_surface: faces.bin does not match height field");
  const char* p = bytes.data() + 16;
  for (Face& f : s.faces) {
    const auto kind = static_cast<FaceKind>(get_le<std::uint8_t>(p));
    bool same = kind == f.kind;
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 3; ++k)
        same = same && get_le<double>(p + 1 + (c * 3 + k) * 8) == f.v[c][k];
    same = same && get_le<std::uint32_t>(p + 97) == f.texels_u &&
           get_le<std::uint32_t>(p + 101) == f.texels_v &&
           get_le<std::uint64_t>(p + 105) == f.offset;
    if (!same)
      throw FormatError("load_surface: face record disagrees with height field");
    p += kFaceRecordSize;
  }

  const std::uint64_t texels = s.texel_count();
  const Raster atlas = read_raster(dir / m.value("atlas", "atlas.pfm"));
  const Raster counts = read_raster(dir / m.value("counts", "count.pfm"));
  if (atlas.channels() != 3 || atlas.size() < texels * 3 ||
      counts.channels() != 1 || counts.size() < texels)
    throw FormatError("load_surface: atlas too small for face table");
  std::copy_n(atlas.f32_data().begin(), texels * 3, s.texel_rgb.begin());
  for (std::uint64_t i = 0; i < texels; ++i)
    s.source_count[i] = static_cast<std::uint16_t>(counts.f32_data()[i]);
  return s;
}

}  // namespace crossview
