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
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "crossview/edges.hpp"
#include "crossview/error.hpp"
#include "crossview/metrics.hpp"
#include "crossview/panorama.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace crossview {
namespace {

Raster noise_image(int w, int h, int channels, std::uint64_t seed, int lo = 0,
                   int hi = 255) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(lo, hi);
  Raster r = Raster::u8(w, h, channels);
  for (auto& v : r.u8_data()) v = static_cast<std::uint8_t>(d(rng));
  return r;
}

Raster plus(const Raster& a, int k) {
  Raster b = a;
  for (auto& v : b.u8_data()) v = static_cast<std::uint8_t>(std::clamp(v + k, 0, 255));
  return b;
}

TEST(Psnr, ConstantOffsetByHand) {
  const Raster a = noise_image(40, 30, 3, 1, 0, 239);
  const Raster b = plus(a, 16);
  // MSE = 256 on every channel.
  const double expect = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  EXPECT_NEAR(psnr(a, b), expect, 1e-12);
  EXPECT_NEAR(psnr(a, b), 24.0484, 1e-4);
}

TEST(Psnr, IdenticalAndMaximal) {
  const Raster a = noise_image(16, 16, 3, 2);
  EXPECT_TRUE(std::isinf(psnr(a, a)) && psnr(a, a) > 0);
  Raster black = Raster::u8(16, 16, 3), white = Raster::u8(16, 16, 3);
  for (auto& v : white.u8_data()) v = 255;
  EXPECT_DOUBLE_EQ(psnr(black, white), 0.0);
  EXPECT_THROW(psnr(a, Raster::u8(16, 15, 3)), DimMismatch);
}

TEST(Psnr, SymmetricAndMonotoneInNoise) {
  const Raster a = noise_image(64, 64, 3, 3, 60, 190);
  double last = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(4);
  for (int amp : {2, 5, 10, 20, 40}) {
    Raster b = a;
    std::uniform_int_distribution<int> d(-amp, amp);
    for (auto& v : b.u8_data()) v = static_cast<std::uint8_t>(v + d(rng));
    const double p = psnr(a, b);
    EXPECT_EQ(p, psnr(b, a));
    EXPECT_LT(p, last);
    last = p;
  }
}

// Direct reference: for every full 11 x 11 window, Gaussian-weighted
// moments summed in place.
double ssim_reference(const Raster& a, const Raster& b) {
  auto lum = [](const Raster& r, int x, int y) {
    if (r.channels() == 1) return double(r.u8_at(x, y));
    return 0.299 * r.u8_at(x, y, 0) + 0.587 * r.u8_at(x, y, 1) + 0.114 * r.u8_at(x, y, 2);
  };
  double w[11][11], ws = 0.0;
  for (int j = 0; j < 11; ++j)
    for (int i = 0; i < 11; ++i) {
      const double dx = i - 5, dy = j - 5;
      w[j][i] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      ws += w[j][i];
    }
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0.0;
  int n = 0;
  for (int y0 = 0; y0 + 11 <= a.height(); ++y0)
    for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
      double mx = 0, my = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          mx += w[j][i] / ws * lum(a, x0 + i, y0 + j);
          my += w[j][i] / ws * lum(b, x0 + i, y0 + j);
        }
      double vx = 0, vy = 0, cov = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          const double p = lum(a, x0 + i, y0 + j) - mx, q = lum(b, x0 + i, y0 + j) - my;
          vx += w[j][i] / ws * p * p;
          vy += w[j][i] / ws * q * q;
          cov += w[j][i] / ws * p * q;
        }
      total += (2 * mx * my + c1) * (2 * cov + c2) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++n;
    }
  return total / n;
}

TEST(Ssim, MatchesDirectReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Raster a = noise_image(32, 32, 3, 100 + seed);
    Raster b = a;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(-40, 40);
    for (auto& v : b.u8_data()) v = static_cast<std::uint8_t>(std::clamp(v + d(rng), 0, 255));
    EXPECT_NEAR(ssim(a, b), ssim_reference(a, b), 1e-6) << seed;
    const Raster c = noise_image(32, 32, 3, 200 + seed);
    EXPECT_NEAR(ssim(a, c), ssim_reference(a, c), 1e-6) << seed;
  }
  const Raster g1 = noise_image(23, 17, 1, 7), g2 = noise_image(23, 17, 1, 8);
  EXPECT_NEAR(ssim(g1, g2), ssim_reference(g1, g2), 1e-6);
}

TEST(Ssim, SelfAndConstant) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Raster a = noise_image(20 + int(s), 14 + int(s), 3, s);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  }
  Raster c = Raster::u8(12, 12, 3);
  for (auto& v : c.u8_data()) v = 90;
  EXPECT_DOUBLE_EQ(ssim(c, c), 1.0);
  const Raster a = noise_image(32, 32, 3, 9), b = noise_image(32, 32, 3, 10);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
}

TEST(Ssim, TooSmallAndMismatch) {
  EXPECT_THROW(ssim(Raster::u8(10, 20, 3), Raster::u8(10, 20, 3)), TooSmall);
  EXPECT_THROW(ssim(Raster::u8(20, 20, 3), Raster::u8(20, 21, 3)), DimMismatch);
}

TEST(MaskIou, SetCountingExample) {
  Raster a = Raster::u8(10, 10, 1), b = Raster::u8(10, 10, 1);
  for (int i = 0; i < 10; ++i) a.u8_data()[i] = 255;
  for (int i = 5; i < 15; ++i) b.u8_data()[i] = 255;
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 5.0 / 15.0);
  EXPECT_DOUBLE_EQ(mask_iou(Raster::u8(3, 3, 1), Raster::u8(3, 3, 1)), 1.0);
}

TEST(EdgeIou, MatchesSetCountingOnCannyMaps) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Raster a = noise_image(40, 30, 3, seed), b = noise_image(40, 30, 3, seed + 50);
    const Raster ea = extract_edges(a, 50, 150), eb = extract_edges(b, 50, 150);
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < ea.u8_data().size(); ++i) {
      inter += ea.u8_data()[i] && eb.u8_data()[i];
      uni += ea.u8_data()[i] || eb.u8_data()[i];
    }
    const double expect = uni ? double(inter) / double(uni) : 1.0;
    EXPECT_EQ(edge_iou(a, b), expect);
    EXPECT_EQ(edge_iou(a, b), edge_iou(b, a));
  }
}

TEST(EdgeIou, IdenticalAndBlank) {
  const Raster a = noise_image(30, 30, 3, 1);
  for (auto [lo, hi] : {std::pair{10.0, 20.0}, {50.0, 150.0}, {300.0, 900.0}})
    EXPECT_EQ(edge_iou(a, a, lo, hi), 1.0);
  EXPECT_EQ(edge_iou(Raster::u8(20, 20, 3), Raster::u8(20, 20, 3)), 1.0);
}

TEST(SemanticIou, Examples) {
  Raster gt = Raster::u8(20, 20, 1), pred = Raster::u8(20, 20, 1);
  // 100-px gt building; prediction covers 80 of it and 20 outside.
  for (int i = 0; i < 100; ++i) gt.u8_data()[i] = kBuilding;
  for (int i = 20; i < 120; ++i) pred.u8_data()[i] = kBuilding;
  const ClassIou b = semantic_iou(pred, gt, kBuilding);
  ASSERT_TRUE(b.iou);
  EXPECT_DOUBLE_EQ(*b.iou, 80.0 / 120.0);
  EXPECT_EQ(b.pred, 100u);
  EXPECT_EQ(b.gt, 100u);
  EXPECT_EQ(b.intersection, 80u);
  EXPECT_EQ(b.uni, 120u);
  EXPECT_EQ(*semantic_iou(gt, gt, kBuilding).iou, 1.0);
  EXPECT_FALSE(semantic_iou(gt, pred, kSky).iou);

  Raster shifted = Raster::u8(20, 20, 1);
  for (int i = 200; i < 300; ++i) shifted.u8_data()[i] = kBuilding;
  EXPECT_EQ(*semantic_iou(shifted, gt, kBuilding).iou, 0.0);
}

TEST(SemanticIou, MatchesSetCountingAndIsSymmetric) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Raster p = Raster::u8(15, 11, 1), g = Raster::u8(15, 11, 1);
    for (auto& v : p.u8_data()) v = static_cast<std::uint8_t>(rng() % 3);
    for (auto& v : g.u8_data()) v = static_cast<std::uint8_t>(rng() % 3);
    for (std::uint8_t c = 0; c < 3; ++c) {
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < p.u8_data().size(); ++i) {
        inter += p.u8_data()[i] == c && g.u8_data()[i] == c;
        uni += p.u8_data()[i] == c || g.u8_data()[i] == c;
      }
      EXPECT_EQ(*semantic_iou(p, g, c).iou, double(inter) / double(uni));
      EXPECT_EQ(*semantic_iou(p, g, c).iou, *semantic_iou(g, p, c).iou);
    }
  }
}

TEST(MetricsJson, InfinityAndUndefinedClasses) {
  testing::TempDir dir;
  const Raster a = noise_image(24, 24, 3, 1);
  Raster labels = Raster::u8(24, 24, 1);
  for (int i = 0; i < 100; ++i) labels.u8_data()[i] = kSky;
  const MetricReport same = evaluate_pair("same", a, a, &labels, &labels);
  const MetricReport off = evaluate_pair("off", a, plus(a, 16), nullptr, nullptr);
  write_metrics_json({same, off}, {}, dir / "metrics.json");
  const auto j = nlohmann::json::parse(testing::slurp(dir / "metrics.json"));
  EXPECT_EQ(j["pairs"][0]["psnr"], "+inf");
  EXPECT_EQ(j["pairs"][0]["is"], 1.0);
  EXPECT_TRUE(j["pairs"][0]["ib"].is_null());
  EXPECT_TRUE(j["pairs"][1]["is"].is_null());
  // The finite PSNR alone enters the mean.
  EXPECT_DOUBLE_EQ(j["mean"]["psnr"].get<double>(), off.psnr);
  EXPECT_EQ(j["mean"]["psnr_infinite"], 1);
  EXPECT_EQ(j["mean"]["is"], 1.0);
  for (const char* k : {"psnr", "ssim", "ie", "ib", "ig", "is"})
    EXPECT_TRUE(j["pairs"][0].contains(k)) << k;
}

TEST(PerceptualManifest, LinesAndMissing) {
  testing::TempDir dir;
  testing::spit(dir / "p.png", "x");
  testing::spit(dir / "g.png", "x");
  const std::vector<PerceptualPair> pairs = {{dir / "p.png", dir / "g.png"},
                                             {dir / "p.png", dir / "g.png"},
                                             {dir / "p.png", dir / "nope.png"}};
  EXPECT_EQ(export_perceptual_manifest(pairs, dir / "m.jsonl"), 1u);
  std::ifstream in(dir / "m.jsonl");
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].contains("missing"));
  EXPECT_EQ(rows[2]["missing"], true);
  EXPECT_EQ(export_perceptual_manifest({}, dir / "empty.jsonl"), 0u);
  EXPECT_EQ(testing::slurp(dir / "empty.jsonl"), "");
}

}  // namespace
}  // namespace crossview
