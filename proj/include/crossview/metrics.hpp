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

#ifndef CROSSVIEW_METRICS_HPP_
#define CROSSVIEW_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossview/raster.hpp"

namespace crossview {

inline constexpr double kMetricCannyLow = 50.0;
inline constexpr double kMetricCannyHigh = 150.0;

// 10 log10(255^2 / MSE) over all channels; +inf for identical images.
double psnr(const Raster& a, const Raster& b);

// Mean SSIM over all full 11x11 Gaussian windows (sigma 1.5) of the luma
// channel.
double ssim(const Raster& a, const Raster& b);

// IoU of the nonzero pixels of two masks; 1.0 when both are empty.
double mask_iou(const Raster& a, const Raster& b);

// IoU of the two images' Canny edge maps.
double edge_iou(const Raster& a, const Raster& b, double low = kMetricCannyLow,
                double high = kMetricCannyHigh);

struct ClassIou {
  std::optional<double> iou;  // empty when the class is in neither map
  std::uint64_t pred = 0;
  std::uint64_t gt = 0;
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
};

ClassIou semantic_iou(const Raster& pred_labels, const Raster& gt_labels,
                      std::uint8_t label);

struct MetricReport {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double ie = 0.0;
  ClassIou ib, ig, is;  // building, ground, sky
};

struct MetricOptions {
  double canny_low = kMetricCannyLow;
  double canny_high = kMetricCannyHigh;
};

// Label maps are optional; without them the semantic IoUs stay undefined.
MetricReport evaluate_pair(const std::string& name, const Raster& pred,
                           const Raster& gt, const Raster* pred_labels,
                           const Raster* gt_labels,
                           const MetricOptions& options = {});

// Per-pair rows plus a mean row. Mean PSNR is over finite values; undefined
// IoUs are excluded from their means. +inf is written as the string "+inf".
void write_metrics_json(const std::vector<MetricReport>& reports,
                        const MetricOptions& options,
                        const std::filesystem::path& path);

struct PerceptualPair {
  std::filesystem::path pred;
  std::filesystem::path gt;
};

// JSONL of {"pred", "gt"} records; records whose files are missing carry
// "missing": true. Returns the number of such records.
std::size_t export_perceptual_manifest(const std::vector<PerceptualPair>& pairs,
                                       const std::filesystem::path& out);

}  // namespace crossview

#endif  // CROSSVIEW_METRICS_HPP_
