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

#include "crossview/texture_fusion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include "crossview/parallel.hpp"

namespace crossview {

namespace fs = std::filesystem;

void SatelliteView::validate() const {
  if (image.empty() || image.channels() != 3 || image.type() != PixelType::kU8)
    throw FormatError("texture_fusion: view " + std::to_string(id) +
                      " must be a 3-channel 8-bit image");
  rpc.validate();
}

fs::path rpc_sidecar_path(const fs::path& image) {
  fs::path p = image;
  p.replace_extension(".rpc.json");
  return p;
}

SatelliteView read_view(const fs::path& png, int id) {
  SatelliteView v;
  v.image = read_raster(png, RasterFormat::kPng8);
  v.rpc = read_rpc(rpc_sidecar_path(png));
  v.id = id;
  v.validate();
  return v;
}

void write_view(const SatelliteView& view, const fs::path& png) {
  write_raster(view.image, png);
  write_rpc(view.rpc, rpc_sidecar_path(png));
}

namespace {

// Line of sight for a whole face, evaluated at its centroid. Faces whose
// centroid leaves the RPC domain are not seen by the view.
struct FaceRay {
  bool ok = false;
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();  // sensor -> ground
  double weight = 0.0;
};

FaceRay face_ray(const TileFrame& frame, const Face& face,
                 const RpcModel& rpc) {
  FaceRay r;
  const Eigen::Vector3d c = face.centroid();
  try {
    r.dir = local_view_direction(rpc, frame.lat_of(c.y()), frame.lon_of(c.x()),
                                 c.z());
  } catch (const RuntimeError&) {
    return r;
  }
  const Eigen::Vector3d n = face.normal();
  if (!r.dir.allFinite() || n.dot(r.dir) > 0.0) return r;
  r.ok = true;
  r.weight = std::max(0.0, -r.dir.dot(n));
  return r;
}

// Marches from p toward the sensor; false once the ray dips below the field.
bool unoccluded(const TexturedSurface& s, const TileFrame& frame,
                const Eigen::Vector3d& p, const Eigen::Vector3d& up) {
  const double step = 0.5 * frame.gsd();
  const double top = s.max_height;
  const double ext_e = frame.extent_east(), ext_n = frame.extent_north();
  for (long k = 1;; ++k) {
    const Eigen::Vector3d q = p + (k * step) * up;
    if (q.z() > top) return true;
    if (!(q.x() >= 0.0 && q.y() >= 0.0 && q.x() < ext_e && q.y() < ext_n))
      return true;
    const int cx = std::clamp(frame.cell_x(q.x()), 0, frame.width() - 1);
    const int cy = std::clamp(frame.cell_y(q.y()), 0, frame.height() - 1);
    if (s.field.valid_at(cx, cy) && q.z() < s.field.at(cx, cy)) return false;
  }
}

constexpr double kSurfaceOffset = 1e-3;  // meters along the face normal

template <class Fn>
void for_each_visible_texel(const TexturedSurface& s, const SatelliteView& view,
                            Fn&& fn) {
  const TileFrame frame = s.frame();
  parallel_for(s.faces.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      const Face& face = s.faces[f];
      const FaceRay ray = face_ray(frame, face, view.rpc);
      if (!ray.ok) continue;
      const Eigen::Vector3d n = face.normal();
      const Eigen::Vector3d up = -ray.dir;
      for (std::uint32_t w = 0; w < face.texels_v; ++w) {
        for (std::uint32_t u = 0; u < face.texels_u; ++u) {
          const Eigen::Vector3d p = face.texel_center(u, w);
          if (!unoccluded(s, frame, p + kSurfaceOffset * n, up)) continue;
          fn(face.offset + static_cast<std::uint64_t>(w) * face.texels_u + u,
             p, ray);
        }
      }
    }
  });
}

}  // namespace

std::vector<std::uint8_t> compute_visibility(const TexturedSurface& surface,
                                             const SatelliteView& view) {
  std::vector<std::uint8_t> visible(surface.texel_count(), 0);
  for_each_visible_texel(surface, view,
                         [&](std::uint64_t t, const Eigen::Vector3d&,
                             const FaceRay&) { visible[t] = 1; });
  return visible;
}

TextureSamples project_textures(const TexturedSurface& surface,
                                const std::vector<SatelliteView>& views) {
  if (views.empty())
    throw ValidationError("texture_fusion.project_textures: no views");
  std::vector<const SatelliteView*> order;
  for (const auto& v : views) {
    v.validate();
    order.push_back(&v);
  }
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->id == order[i - 1]->id)
      throw ValidationError("texture_fusion.project_textures: duplicate view id " +
                            std::to_string(order[i]->id));

  const std::uint64_t texels = surface.texel_count();
  const TileFrame frame = surface.frame();
  // Dense per-view staging; weight 0 marks an absent sample.
  std::vector<std::vector<TexelSample>> staged(order.size());
  for (std::size_t vi = 0; vi < order.size(); ++vi) {
    const SatelliteView& view = *order[vi];
    auto& out = staged[vi];
    out.assign(texels, TexelSample{static_cast<std::int32_t>(vi), 0.0, {}});
    const double max_x = view.image.width() - 1, max_y = view.image.height() - 1;
    for_each_visible_texel(
        surface, view,
        [&](std::uint64_t t, const Eigen::Vector3d& p, const FaceRay& ray) {
          if (!(ray.weight > 0.0)) return;
          ImagePoint ip;
          try {
            ip = project_ground_to_image(view.rpc, frame.lat_of(p.y()),
                                         frame.lon_of(p.x()), p.z());
          } catch (const RuntimeError&) {
            return;
          }
          if (!(ip.samp >= 0.0 && ip.line >= 0.0 && ip.samp <= max_x &&
                ip.line <= max_y))
            return;
          TexelSample& s = out[t];
          bilinear_sample_into(view.image, ip.samp, ip.line, s.rgb);
          s.weight = ray.weight;
        });
  }

  TextureSamples result;
  for (const auto* v : order) result.view_ids.push_back(v->id);
  result.begin.assign(texels + 1, 0);
  for (std::uint64_t t = 0; t < texels; ++t) {
    std::uint64_t n = 0;
    for (const auto& per_view : staged)
      if (per_view[t].weight > 0.0) ++n;
    result.begin[t + 1] = result.begin[t] + n;
    if (n == 0) ++result.uncovered;
  }
  result.samples.resize(result.begin[texels]);
  for (std::uint64_t t = 0; t < texels; ++t) {
    std::uint64_t k = result.begin[t];
    for (const auto& per_view : staged)
      if (per_view[t].weight > 0.0) result.samples[k++] = per_view[t];
  }
  return result;
}

ColorAdjustment ColorAdjustment::identity(const std::vector<int>& view_ids) {
  ColorAdjustment a;
  a.view_ids = view_ids;
  a.gain.assign(view_ids.size(), {1.0, 1.0, 1.0});
  a.bias.assign(view_ids.size(), {0.0, 0.0, 0.0});
  return a;
}

std::size_t ColorAdjustment::index_of(int view_id) const {
  const auto it = std::find(view_ids.begin(), view_ids.end(), view_id);
  if (it == view_ids.end())
    throw ValidationError("texture_fusion: no adjustment for view " +
                          std::to_string(view_id));
  return static_cast<std::size_t>(it - view_ids.begin());
}

ColorAdjustment solve_color_consistency(const TextureSamples& samples,
                                        std::uint64_t min_shared) {
  const std::size_t nv = samples.view_ids.size();
  if (nv == 0)
    throw ValidationError("texture_fusion.solve_color_consistency: no views");
  ColorAdjustment adj = ColorAdjustment::identity(samples.view_ids);
  if (nv == 1) return adj;

  // Overlap graph and normal equations in one pass.
  std::vector<std::uint64_t> shared(nv * nv, 0);
  const int n = static_cast<int>(2 * nv);
  std::array<Eigen::MatrixXd, 3> normal;
  for (auto& m : normal) m = Eigen::MatrixXd::Zero(n, n);
  for (std::uint64_t t = 0; t < samples.texel_count(); ++t) {
    const auto obs = samples.at(t);
    for (std::size_t a = 0; a < obs.size(); ++a) {
      for (std::size_t b = a + 1; b < obs.size(); ++b) {
        const int i = obs[a].view, j = obs[b].view;
        ++shared[i * nv + j];
        ++shared[j * nv + i];
        for (int c = 0; c < 3; ++c) {
          // Row r: r . x = g_i I_i + b_i - g_j I_j - b_j.
          const int idx[4] = {2 * i, 2 * i + 1, 2 * j, 2 * j + 1};
          const double val[4] = {obs[a].rgb[c], 1.0, -obs[b].rgb[c], -1.0};
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q)
              normal[c](idx[p], idx[q]) += val[p] * val[q];
        }
      }
    }
  }

  std::vector<bool> reached(nv, false);
  std::deque<std::size_t> queue{0};
  reached[0] = true;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < nv; ++j) {
      if (!reached[j] && shared[i * nv + j] >= min_shared) {
        reached[j] = true;
        queue.push_back(j);
      }
    }
  }
  for (std::size_t j = 0; j < nv; ++j)
    if (!reached[j])
      throw DisconnectedViews(
          "texture_fusion.solve_color_consistency: view " +
          std::to_string(samples.view_ids[j]) + " shares fewer than " +
          std::to_string(min_shared) + " texels with the anchor's component");

  // Anchor (index 0) fixed at g = 1, b = 0: N_ff x_f = -N_fa (1, 0).
  const int nf = n - 2;
  for (int c = 0; c < 3; ++c) {
    const Eigen::MatrixXd nff = normal[c].bottomRightCorner(nf, nf);
    const Eigen::VectorXd rhs = -normal[c].block(2, 0, nf, 1);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(nff);
    if (qr.rank() < nf)
      throw SolveError("texture_fusion.solve_color_consistency: channel " +
                       std::to_string(c) + " is rank deficient");
    const Eigen::VectorXd x = qr.solve(rhs);
    for (std::size_t v = 1; v < nv; ++v) {
      const double g = x(2 * (v - 1)), b = x(2 * (v - 1) + 1);
      if (!(g > 0.0) || !std::isfinite(b))
        throw SolveError("texture_fusion.solve_color_consistency: view " +
                         std::to_string(samples.view_ids[v]) +
                         " solved to non-positive gain");
      adj.gain[v][c] = g;
      adj.bias[v][c] = b;
    }
  }
  return adj;
}

double color_objective(const TextureSamples& samples,
                       const ColorAdjustment& adj) {
  std::vector<std::size_t> map(samples.view_ids.size());
  for (std::size_t v = 0; v < map.size(); ++v)
    map[v] = adj.index_of(samples.view_ids[v]);
  double total = 0.0;
  for (std::uint64_t t = 0; t < samples.texel_count(); ++t) {
    const auto obs = samples.at(t);
    for (std::size_t a = 0; a < obs.size(); ++a)
      for (std::size_t b = a + 1; b < obs.size(); ++b)
        for (int c = 0; c < 3; ++c) {
          const double d = adj.apply(map[obs[a].view], c, obs[a].rgb[c]) -
                           adj.apply(map[obs[b].view], c, obs[b].rgb[c]);
          total += d * d;
        }
  }
  return total;
}

TexturedSurface fuse(const TexturedSurface& surface,
                     const TextureSamples& samples,
                     const ColorAdjustment& adj) {
  const std::uint64_t texels = surface.texel_count();
  if (samples.texel_count() != texels)
    throw DimMismatch("texture_fusion.fuse: samples do not match the surface");
  std::vector<std::size_t> map(samples.view_ids.size());
  for (std::size_t v = 0; v < map.size(); ++v)
    map[v] = adj.index_of(samples.view_ids[v]);

  TexturedSurface out = surface;
  out.texel_rgb.assign(texels * 3, 0.0f);
  out.source_count.assign(texels, 0);
  std::array<double, 3> sum_all{};
  std::uint64_t covered = 0;
  for (std::uint64_t t = 0; t < texels; ++t) {
    const auto obs = samples.at(t);
    if (obs.empty()) continue;
    double wsum = 0.0;
    std::array<double, 3> acc{};
    for (const TexelSample& s : obs) {
      wsum += s.weight;
      for (int c = 0; c < 3; ++c)
        acc[c] += s.weight * adj.apply(map[s.view], c, s.rgb[c]);
    }
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(acc[c] / wsum, 0.0, 255.0);
      out.texel_rgb[t * 3 + c] = static_cast<float>(v);
      sum_all[c] += v;
    }
    out.source_count[t] = static_cast<std::uint16_t>(
        std::min<std::size_t>(obs.size(), std::numeric_limits<std::uint16_t>::max()));
    ++covered;
  }

  std::array<float, 3> fallback{};
  if (covered > 0)
    for (int c = 0; c < 3; ++c)
      fallback[c] = static_cast<float>(sum_all[c] / covered);

  // Uncovered texels take the nearest covered texel of the same face.
  parallel_for(out.faces.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<Eigen::Vector3d, std::uint64_t>> have;
    for (std::size_t f = begin; f < end; ++f) {
      const Face& face = out.faces[f];
      have.clear();
      bool missing = false;
      for (std::uint32_t w = 0; w < face.texels_v; ++w)
        for (std::uint32_t u = 0; u < face.texels_u; ++u) {
          const std::uint64_t t = face.offset + std::uint64_t{w} * face.texels_u + u;
          if (out.source_count[t] > 0)
            have.emplace_back(face.texel_center(u, w), t);
          else
            missing = true;
        }
      if (!missing) continue;
      for (std::uint32_t w = 0; w < face.texels_v; ++w)
        for (std::uint32_t u = 0; u < face.texels_u; ++u) {
          const std::uint64_t t = face.offset + std::uint64_t{w} * face.texels_u + u;
          if (out.source_count[t] > 0) continue;
          const float* src = fallback.data();
          double best = std::numeric_limits<double>::infinity();
          const Eigen::Vector3d p = face.texel_center(u, w);
          for (const auto& [q, k] : have) {
            const double d = (q - p).squaredNorm();
            if (d < best) {
              best = d;
              src = &out.texel_rgb[k * 3];
            }
          }
          for (int c = 0; c < 3; ++c) out.texel_rgb[t * 3 + c] = src[c];
        }
    }
  });
  return out;
}

nlohmann::ordered_json adjustment_to_json(const ColorAdjustment& adj) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < adj.view_ids.size(); ++v)
    arr.push_back({{"view", adj.view_ids[v]},
                   {"gain", adj.gain[v]},
                   {"bias", adj.bias[v]}});
  return arr;
}

}  // namespace crossview
