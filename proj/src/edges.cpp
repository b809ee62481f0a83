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

#include "crossview/edges.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

namespace crossview {

namespace {

constexpr int kGauss[5][5] = {{2, 4, 5, 4, 2},
                              {4, 9, 12, 9, 4},
                              {5, 12, 15, 12, 5},
                              {4, 9, 12, 9, 4},
                              {2, 4, 5, 4, 2}};
constexpr std::int64_t kGaussSum = 159;
constexpr std::int64_t kLumaScale = 1000;
constexpr std::int64_t kSobelScale = 1;

}  // namespace

Raster extract_edges(const Raster& image, double low, double high, bool wrap_x) {
  if (image.empty() || image.type() != PixelType::kU8 ||
      (image.channels() != 1 && image.channels() != 3))
    throw FormatError("conditioning.extract_edges: expected 8-bit gray or RGB");
  if (!(low > 0.0 && low < high))
    throw ValidationError("conditioning.extract_edges: need 0 < low < high");
  const int w = image.width(), h = image.height();
  auto at = [&](std::vector<std::int64_t>& v, int x, int y) -> std::int64_t& {
    return v[static_cast<std::size_t>(y) * w + x];
  };
  auto cx = [&](int x) {
    return wrap_x ? ((x % w) + w) % w : std::clamp(x, 0, w - 1);
  };
  auto cy = [&](int y) { return std::clamp(y, 0, h - 1); };

  std::vector<std::int64_t> luma(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      at(luma, x, y) =
          image.channels() == 1
              ? kLumaScale * image.u8_at(x, y)
              : 299 * image.u8_at(x, y, 0) + 587 * image.u8_at(x, y, 1) +
                    114 * image.u8_at(x, y, 2);

  std::vector<std::int64_t> blur(luma.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t s = 0;
      for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i)
          s += kGauss[j + 2][i + 2] * at(luma, cx(x + i), cy(y + j));
      at(blur, x, y) = s;
    }

  std::vector<std::int64_t> gx(luma.size()), gy(luma.size()), mag(luma.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto b = [&](int i, int j) { return at(blur, cx(x + i), cy(y + j)); };
      const std::int64_t dx = (b(1, -1) + 2 * b(1, 0) + b(1, 1)) -
                              (b(-1, -1) + 2 * b(-1, 0) + b(-1, 1));
      const std::int64_t dy = (b(-1, 1) + 2 * b(0, 1) + b(1, 1)) -
                              (b(-1, -1) + 2 * b(0, -1) + b(1, -1));
      at(gx, x, y) = dx;
      at(gy, x, y) = dy;
      at(mag, x, y) = dx * dx + dy * dy;
    }

  // Squared thresholds in the raw integer scale.
  const long double unit =
      static_cast<long double>(kSobelScale * kGaussSum * kLumaScale);
  const long double low2 = (low * unit) * (low * unit);
  const long double high2 = (high * unit) * (high * unit);

  // 0 none, 1 weak, 2 strong.
  std::vector<std::uint8_t> cls(luma.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::int64_t m = at(mag, x, y);
      if (static_cast<long double>(m) <= low2) continue;
      const std::int64_t ax = std::llabs(at(gx, x, y));
      const std::int64_t ay = std::llabs(at(gy, x, y));
      // Direction bins with tan(22.5 deg) ~ 41421/100000.
      int dx, dy;
      if (ay * 100000 <= ax * 41421) {
        dx = 1, dy = 0;
      } else if (ax * 100000 <= ay * 41421) {
        dx = 0, dy = 1;
      } else if ((at(gx, x, y) > 0) == (at(gy, x, y) > 0)) {
        dx = 1, dy = 1;
      } else {
        dx = 1, dy = -1;
      }
      auto neighbor = [&](int sx, int sy) -> std::int64_t {
        const int nx = wrap_x ? cx(x + sx) : x + sx, ny = y + sy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return 0;
        return at(mag, nx, ny);
      };
      if (!(m >= neighbor(-dx, -dy) && m > neighbor(dx, dy))) continue;
      cls[static_cast<std::size_t>(y) * w + x] =
          static_cast<long double>(m) > high2 ? 2 : 1;
    }

  Raster out = Raster::u8(w, h, 1);
  std::vector<int> stack;
  for (int i = 0; i < w * h; ++i) {
    if (cls[i] != 2 || out.u8_data()[i]) continue;
    out.u8_data()[i] = 255;
    stack.push_back(i);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int px = p % w, py = p / w;
      for (int j = -1; j <= 1; ++j)
        for (int k = -1; k <= 1; ++k) {
          const int nx = wrap_x ? cx(px + k) : px + k, ny = py + j;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (cls[q] == 0 || out.u8_data()[q]) continue;
          out.u8_data()[q] = 255;
          stack.push_back(q);
        }
    }
  }
  return out;
}

}  // namespace crossview
