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

#ifndef CROSSVIEW_TESTS_FIXTURES_HPP_
#define CROSSVIEW_TESTS_FIXTURES_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "crossview/geometry_refine.hpp"
#include "crossview/raster.hpp"
#include "crossview/rpc.hpp"

namespace crossview::testing {

// Near-affine model: line falls with latitude, sample grows with longitude,
// small random height parallax and weak higher-order terms.
inline RpcModel near_affine_rpc(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RpcModel m;
  m.lat_off = 40.0 + 0.5 * u(rng);
  m.lon_off = -105.0 + 0.5 * u(rng);
  m.lat_scale = 0.05;
  m.lon_scale = 0.05;
  m.height_off = 100.0;
  m.height_scale = 500.0;
  m.line_off = m.samp_off = 5000.0;
  m.line_scale = m.samp_scale = 5000.0;
  m.line_num[0] = 0.01 * u(rng);
  m.line_num[1] = 0.05 * u(rng);
  m.line_num[2] = -1.0 + 0.05 * u(rng);
  m.line_num[3] = 0.05 * u(rng);
  m.samp_num[0] = 0.01 * u(rng);
  m.samp_num[1] = 1.0 + 0.05 * u(rng);
  m.samp_num[2] = 0.05 * u(rng);
  m.samp_num[3] = 0.05 * u(rng);
  for (int i = 4; i < 20; ++i) {
    m.line_num[i] = 0.002 * u(rng);
    m.samp_num[i] = 0.002 * u(rng);
  }
  m.line_den[0] = m.samp_den[0] = 1.0;
  for (int i = 1; i < 20; ++i) {
    m.line_den[i] = 0.001 * u(rng);
    m.samp_den[i] = 0.001 * u(rng);
  }
  return m;
}

// Unit scales and zero offsets; line = lat, samp = lon.
inline RpcModel identity_rpc() {
  RpcModel m;
  m.line_num[2] = 1.0;
  m.samp_num[1] = 1.0;
  m.line_den[0] = m.samp_den[0] = 1.0;
  return m;
}

// 20 x 20 field (gsd 0.5) on z = a e + b n + c, with a seeded `fraction` of
// cells lifted by `offset` meters.
inline HeightField plane_with_outliers(double a, double b, double c,
                                       double fraction, double offset,
                                       std::uint64_t seed) {
  const int n = 20;
  HeightField hf{Raster::f32(n, n, 1), GeoRef{30.0, 120.0, 0.5, {}}};
  const TileFrame f = hf.frame();
  std::vector<int> order(n * n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int lifted = static_cast<int>(std::lround(fraction * n * n));
  std::vector<bool> out(n * n, false);
  for (int i = 0; i < lifted; ++i) out[order[i]] = true;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double z = a * f.east_of(x + 0.5) + b * f.north_of(y + 0.5) + c;
      hf.raster.f32_at(x, y) = static_cast<float>(z + (out[y * n + x] ? offset : 0.0));
    }
  return hf;
}

// Best consensus over every triple of valid cells, then a least-squares
// refit on that consensus set. Ties keep the first triple found.
inline GroundPlane exhaustive_consensus_plane(const HeightField& hf,
                                              double threshold) {
  const TileFrame f = hf.frame();
  std::vector<Eigen::Vector3d> pts;
  for (int y = 0; y < hf.height(); ++y)
    for (int x = 0; x < hf.width(); ++x)
      if (hf.valid_at(x, y))
        pts.emplace_back(f.east_of(x + 0.5), f.north_of(y + 0.5), hf.at(x, y));
  const int n = static_cast<int>(pts.size());
  int best = 0;
  Eigen::Vector3d best_plane = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Eigen::Matrix3d m;
        m << pts[i].x(), pts[i].y(), 1, pts[j].x(), pts[j].y(), 1, pts[k].x(),
            pts[k].y(), 1;
        if (std::abs(m.determinant()) < 1e-9) continue;
        const Eigen::Vector3d p =
            m.partialPivLu().solve(Eigen::Vector3d(pts[i].z(), pts[j].z(), pts[k].z()));
        int count = 0, misses = 0;
        const int allowed = n - best;  // a triple must beat `best` strictly
        for (const auto& q : pts) {
          if (std::abs(q.z() - (p[0] * q.x() + p[1] * q.y() + p[2])) <= threshold) {
            ++count;
          } else if (++misses >= allowed) {
            break;
          }
        }
        if (count > best) {
          best = count;
          best_plane = p;
        }
      }
  Eigen::MatrixXd a(best, 3);
  Eigen::VectorXd z(best);
  int r = 0;
  for (const auto& q : pts)
    if (std::abs(q.z() - (best_plane[0] * q.x() + best_plane[1] * q.y() +
                          best_plane[2])) <= threshold) {
      a.row(r) << q.x(), q.y(), 1.0;
      z[r++] = q.z();
    }
  const Eigen::Vector3d ls = a.colPivHouseholderQr().solve(z);
  GroundPlane g;
  g.a = ls[0];
  g.b = ls[1];
  g.c = ls[2];
  g.inliers = static_cast<std::size_t>(best);
  return g;
}

}  // namespace crossview::testing

#endif  // CROSSVIEW_TESTS_FIXTURES_HPP_
