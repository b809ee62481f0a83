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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "crossview/edges.hpp"
#include "crossview/error.hpp"

namespace crossview {
namespace {

Raster step_image(int w, int h, int at, std::uint8_t left, std::uint8_t right) {
  Raster r = Raster::u8(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r.u8_at(x, y) = x < at ? left : right;
  return r;
}

int count_edges(const Raster& e) {
  int n = 0;
  for (auto v : e.u8_data()) n += v != 0;
  return n;
}

TEST(Edges, ConstantImageIsEmpty) {
  for (std::uint8_t c : {0, 77, 255}) {
    Raster r = Raster::u8(40, 30, 3);
    for (auto& v : r.u8_data()) v = c;
    EXPECT_EQ(count_edges(extract_edges(r)), 0);
  }
}

TEST(Edges, StepGivesOneVerticalLine) {
  const Raster e = extract_edges(step_image(40, 30, 20, 0, 255));
  for (int y = 0; y < 30; ++y) {
    int n = 0, col = -1;
    for (int x = 0; x < 40; ++x)
      if (e.u8_at(x, y)) ++n, col = x;
    EXPECT_EQ(n, 1) << "row " << y;
    // The gradient peaks between columns 19 and 20.
    EXPECT_TRUE(col == 19 || col == 20) << col;
  }
  // All rows choose the same column.
  int first = -1;
  for (int x = 0; x < 40; ++x)
    if (e.u8_at(x, 0)) first = x;
  for (int y = 1; y < 30; ++y) EXPECT_EQ(e.u8_at(first, y), 255);
}

// A step of contrast 8 peaks well under `low` = 40 once smoothed; 60 clears
// `high`.
TEST(Edges, LowContrastStepIsEmpty) {
  EXPECT_EQ(count_edges(extract_edges(step_image(40, 30, 20, 100, 108), 40, 100)), 0);
  EXPECT_GT(count_edges(extract_edges(step_image(40, 30, 20, 100, 160), 40, 100)), 0);
}

TEST(Edges, InvariantUnderConstantOffset) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Raster a = Raster::u8(48, 32, 3);
    for (auto& v : a.u8_data()) v = static_cast<std::uint8_t>(rng() % 200);
    Raster b = a;
    const int k = static_cast<int>(rng() % 56);
    for (auto& v : b.u8_data()) v = static_cast<std::uint8_t>(v + k);
    const Raster ea = extract_edges(a), eb = extract_edges(b);
    EXPECT_TRUE(std::ranges::equal(ea.u8_data(), eb.u8_data())) << k;
  }
}

TEST(Edges, OutputIsBinaryAndDeterministic) {
  std::mt19937_64 rng(5);
  Raster a = Raster::u8(33, 21, 1);
  for (auto& v : a.u8_data()) v = static_cast<std::uint8_t>(rng());
  const Raster e1 = extract_edges(a), e2 = extract_edges(a);
  for (auto v : e1.u8_data()) EXPECT_TRUE(v == 0 || v == 255);
  EXPECT_TRUE(std::ranges::equal(e1.u8_data(), e2.u8_data()));
}

TEST(Edges, WrapJoinsBorders) {
  // A step at the seam is only visible when the borders are neighbours.
  const Raster r = step_image(40, 20, 20, 0, 255);
  Raster shifted = Raster::u8(40, 20, 1);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) shifted.u8_at(x, y) = r.u8_at((x + 20) % 40, y);
  // shifted holds 255 | 0 with a second step across the seam.
  const Raster plain = extract_edges(shifted);
  const Raster wrapped = extract_edges(shifted, kDefaultCannyLow, kDefaultCannyHigh, true);
  EXPECT_EQ(count_edges(plain), 20);
  EXPECT_EQ(count_edges(wrapped), 40);
  // Wrapping is shift-equivariant.
  const Raster base = extract_edges(r, kDefaultCannyLow, kDefaultCannyHigh, true);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x)
      EXPECT_EQ(wrapped.u8_at(x, y), base.u8_at((x + 20) % 40, y));
}

TEST(Edges, BadArguments) {
  const Raster r = step_image(8, 8, 4, 0, 255);
  EXPECT_THROW(extract_edges(r, 50, 50), ValidationError);
  EXPECT_THROW(extract_edges(r, 0, 50), ValidationError);
  EXPECT_THROW(extract_edges(Raster::f32(4, 4, 1)), FormatError);
}

}  // namespace
}  // namespace crossview
