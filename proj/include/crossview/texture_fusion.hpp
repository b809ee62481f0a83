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

#ifndef CROSSVIEW_TEXTURE_FUSION_HPP_
#define CROSSVIEW_TEXTURE_FUSION_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "crossview/raster.hpp"
#include "crossview/rpc.hpp"
#include "crossview/surface.hpp"

namespace crossview {

struct SatelliteView {
  Raster image;  // 3 channel u8
  RpcModel rpc;
  int id = 0;

  void validate() const;
};

// `<image>.png` with its `<image>.rpc.json`.
SatelliteView read_view(const std::filesystem::path& png, int id);
void write_view(const SatelliteView& view, const std::filesystem::path& png);
std::filesystem::path rpc_sidecar_path(const std::filesystem::path& image);

// One entry per texel, 1 = visible from the view.
std::vector<std::uint8_t> compute_visibility(const TexturedSurface& surface,
                                             const SatelliteView& view);

struct TexelSample {
  std::int32_t view = 0;  // index into TextureSamples::view_ids
  double weight = 0.0;    // max(0, -direction . normal)
  std::array<double, 3> rgb{};
};

// Per-texel observations in CSR layout: texel t owns
// samples[begin[t] .. begin[t + 1]). Views are ordered by id.
struct TextureSamples {
  std::vector<int> view_ids;
  std::vector<std::uint64_t> begin;
  std::vector<TexelSample> samples;
  std::uint64_t uncovered = 0;  // texels seen by no view

  std::uint64_t texel_count() const {
    return begin.empty() ? 0 : begin.size() - 1;
  }
  std::span<const TexelSample> at(std::uint64_t texel) const {
    return {samples.data() + begin[texel], samples.data() + begin[texel + 1]};
  }
};

TextureSamples project_textures(const TexturedSurface& surface,
                                const std::vector<SatelliteView>& views);

// Per view and channel: adjusted = gain * observed + bias.
struct ColorAdjustment {
  std::vector<int> view_ids;
  std::vector<std::array<double, 3>> gain;
  std::vector<std::array<double, 3>> bias;

  static ColorAdjustment identity(const std::vector<int>& view_ids);
  std::size_t index_of(int view_id) const;
  double apply(std::size_t view, int channel, double value) const {
    return gain[view][channel] * value + bias[view][channel];
  }
};

inline constexpr std::uint64_t kMinSharedTexels = 200;

// Least-squares gain/bias over all co-observed texel pairs; the lowest view
// id is the anchor (gain 1, bias 0).
ColorAdjustment solve_color_consistency(
    const TextureSamples& samples, std::uint64_t min_shared = kMinSharedTexels);

// Sum over texels, view pairs and channels of squared adjusted differences.
double color_objective(const TextureSamples& samples,
                       const ColorAdjustment& adjustment);

// Weighted mean of adjusted samples, clamped to [0, 255]. Texels without
// samples copy the nearest covered texel of their face and keep
// source_count = 0.
TexturedSurface fuse(const TexturedSurface& surface,
                     const TextureSamples& samples,
                     const ColorAdjustment& adjustment);

nlohmann::ordered_json adjustment_to_json(const ColorAdjustment& adjustment);

}  // namespace crossview

#endif  // CROSSVIEW_TEXTURE_FUSION_HPP_
