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

#include "crossview/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "crossview/edges.hpp"
#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

namespace {

void require_same(const Raster& a, const Raster& b, const char* op) {
  if (!a.same_shape(b))
    throw DimMismatch(std::string("metrics.") + op + ": shapes differ (" +
                      std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                      "x" + std::to_string(a.channels()) + " vs " +
                      std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                      "x" + std::to_string(b.channels()) + ")");
}

std::vector<double> luma(const Raster& r) {
  std::vector<double> out(static_cast<std::size_t>(r.width()) * r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      out[static_cast<std::size_t>(y) * r.width() + x] =
          r.channels() == 1 ? r.value(x, y)
                            : 0.299 * r.value(x, y, 0) + 0.587 * r.value(x, y, 1) +
                                  0.114 * r.value(x, y, 2);
  return out;
}

// Valid-mode separable filtering with a 1D kernel.
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

nlohmann::ordered_json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json class_json(const ClassIou& c) {
  return {{"iou", optional_json(c.iou)},
          {"pred_pixels", c.pred},
          {"gt_pixels", c.gt},
          {"intersection", c.intersection},
          {"union", c.uni}};
}

}  // namespace

double psnr(const Raster& a, const Raster& b) {
  require_same(a, b, "psnr");
  if (a.empty()) throw ValidationError("metrics.psnr: empty images");
  double sum = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c) {
        const double d = a.value(x, y, c) - b.value(x, y, c);
        sum += d * d;
      }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sum / static_cast<double>(a.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Raster& a, const Raster& b) {
  require_same(a, b, "ssim");
  constexpr int kWin = 11;
  if (a.width() < kWin || a.height() < kWin)
    throw TooSmall("metrics.ssim: images must be at least 11x11");
  std::vector<double> k(kWin);
  double ks = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    ks += k[i];
  }
  for (double& v : k) v /= ks;

  const int w = a.width(), h = a.height();
  const std::vector<double> x = luma(a), y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
  const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k),
             sxy = filter_valid(xy, w, h, k);
  const double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i],
                 cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double mask_iou(const Raster& a, const Raster& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimMismatch("metrics.mask_iou: masks differ in size");
  std::uint64_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.value(x, y) != 0.0, pb = b.value(x, y) != 0.0;
      inter += pa && pb;
      uni += pa || pb;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double edge_iou(const Raster& a, const Raster& b, double low, double high) {
  require_same(a, b, "edge_iou");
  return mask_iou(extract_edges(a, low, high), extract_edges(b, low, high));
}

ClassIou semantic_iou(const Raster& pred, const Raster& gt, std::uint8_t label) {
  require_same(pred, gt, "semantic_iou");
  if (pred.channels() != 1)
    throw FormatError("metrics.semantic_iou: label maps must be single-channel");
  ClassIou r;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      const bool p = pred.value(x, y) == label, g = gt.value(x, y) == label;
      r.pred += p;
      r.gt += g;
      r.intersection += p && g;
      r.uni += p || g;
    }
  if (r.uni > 0)
    r.iou = static_cast<double>(r.intersection) / static_cast<double>(r.uni);
  return r;
}

MetricReport evaluate_pair(const std::string& name, const Raster& pred,
                           const Raster& gt, const Raster* pred_labels,
                           const Raster* gt_labels, const MetricOptions& o) {
  MetricReport r;
  r.name = name;
  r.psnr = psnr(pred, gt);
  r.ssim = ssim(pred, gt);
  r.ie = edge_iou(pred, gt, o.canny_low, o.canny_high);
  if (pred_labels && gt_labels) {
    r.ib = semantic_iou(*pred_labels, *gt_labels, 1);
    r.ig = semantic_iou(*pred_labels, *gt_labels, 0);
    r.is = semantic_iou(*pred_labels, *gt_labels, 2);
  }
  return r;
}

void write_metrics_json(const std::vector<MetricReport>& reports,
                        const MetricOptions& o, const fs::path& path) {
  nlohmann::ordered_json j;
  j["metadata"] = {{"psnr_space", "rgb"},
                   {"ssim_space", "luma"},
                   {"ssim_window", 11},
                   {"ssim_sigma", 1.5},
                   {"canny_low", o.canny_low},
                   {"canny_high", o.canny_high},
                   {"psnr_mean_over", "finite values"}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  double psnr_sum = 0.0, ssim_sum = 0.0, ie_sum = 0.0;
  std::size_t psnr_n = 0, psnr_inf = 0;
  std::array<double, 3> cls_sum{};
  std::array<std::size_t, 3> cls_n{};
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["psnr"] = number_or_inf(r.psnr);
    row["ssim"] = r.ssim;
    row["ie"] = r.ie;
    row["ib"] = optional_json(r.ib.iou);
    row["ig"] = optional_json(r.ig.iou);
    row["is"] = optional_json(r.is.iou);
    row["counts"] = {{"building", class_json(r.ib)},
                     {"ground", class_json(r.ig)},
                     {"sky", class_json(r.is)}};
    rows.push_back(row);
    if (std::isfinite(r.psnr)) {
      psnr_sum += r.psnr;
      ++psnr_n;
    } else {
      ++psnr_inf;
    }
    ssim_sum += r.ssim;
    ie_sum += r.ie;
    const ClassIou* cls[3] = {&r.ib, &r.ig, &r.is};
    for (int c = 0; c < 3; ++c)
      if (cls[c]->iou) {
        cls_sum[c] += *cls[c]->iou;
        ++cls_n[c];
      }
  }
  j["pairs"] = rows;
  nlohmann::ordered_json mean;
  const double n = static_cast<double>(reports.size());
  mean["count"] = reports.size();
  if (psnr_n > 0)
    mean["psnr"] = psnr_sum / psnr_n;
  else if (psnr_inf > 0)
    mean["psnr"] = "+inf";
  else
    mean["psnr"] = nullptr;
  mean["psnr_infinite"] = psnr_inf;
  mean["ssim"] = reports.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(ssim_sum / n);
  mean["ie"] = reports.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(ie_sum / n);
  const char* keys[3] = {"ib", "ig", "is"};
  for (int c = 0; c < 3; ++c)
    mean[keys[c]] = cls_n[c] ? nlohmann::ordered_json(cls_sum[c] / cls_n[c])
                             : nlohmann::ordered_json(nullptr);
  j["mean"] = mean;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("metrics: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::size_t export_perceptual_manifest(const std::vector<PerceptualPair>& pairs,
                                       const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("metrics.export_perceptual_manifest: cannot write " +
                          path.string());
  std::size_t missing = 0;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["pred"] = p.pred.string();
    j["gt"] = p.gt.string();
    if (!fs::exists(p.pred) || !fs::exists(p.gt)) {
      j["missing"] = true;
      ++missing;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("metrics.export_perceptual_manifest: write failed");
  return missing;
}

}  // namespace crossview
