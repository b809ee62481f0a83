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

#include <cmath>
#include <random>

#include "crossview/error.hpp"
#include "crossview/raster.hpp"
#include "crossview/rpc.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

namespace crossview {
namespace {

using testing::identity_rpc;
using testing::near_affine_rpc;

TEST(RpcForward, IdentityModelSelectsLatitude) {
  const RpcModel m = identity_rpc();
  EXPECT_DOUBLE_EQ(project_ground_to_image(m, 0.5, 0.0, 0.0).line, 0.5);
  EXPECT_DOUBLE_EQ(project_ground_to_image(m, 0.0, -0.3, 0.0).samp, -0.3);
}

TEST(RpcForward, OffsetAndScale) {
  RpcModel m = identity_rpc();
  m.line_off = 100.0;
  m.line_scale = 200.0;
  m.lat_off = 10.0;
  m.lat_scale = 2.0;
  // lat 10.5 normalizes to 0.25.
  EXPECT_DOUBLE_EQ(project_ground_to_image(m, 10.5, 0.0, 0.0).line, 150.0);
}

TEST(RpcForward, CubicTerm) {
  RpcModel m = identity_rpc();
  m.line_num = {};
  m.line_num[15] = 1.0;  // lat^3
  EXPECT_DOUBLE_EQ(project_ground_to_image(m, 0.5, 0.0, 0.0).line, 0.125);
}

// Each coefficient slot must select its monomial in the standard 20-term
// order (1, L, P, H, LP, LH, PH, L2, P2, H2, PLH, L3, LP2, LH2, L2P, P3, PH2,
// L2H, P2H, H3).
TEST(RpcForward, TermOrdering) {
  const double L = 0.3, P = -0.7, H = 0.45;
  const double expect[20] = {1,         L,         P,         H,         L * P,
                             L * H,     P * H,     L * L,     P * P,     H * H,
                             P * L * H, L * L * L, L * P * P, L * H * H, L * L * P,
                             P * P * P, P * H * H, L * L * H, P * P * H, H * H * H};
  for (int i = 0; i < 20; ++i) {
    RpcModel m = identity_rpc();
    m.line_num = {};
    m.line_num[i] = 1.0;
    EXPECT_NEAR(project_ground_to_image(m, P, L, H).line, expect[i], 1e-15) << i;
  }
}

TEST(RpcForward, DegenerateDenominator) {
  RpcModel m = identity_rpc();
  m.line_den[2] = -1.0;  // den = 1 - lat
  EXPECT_THROW(project_ground_to_image(m, 1.0, 0.0, 0.0), DegenerateDenominator);
}

TEST(RpcForward, DomainError) {
  const RpcModel m = identity_rpc();
  EXPECT_THROW(project_ground_to_image(m, 1.6, 0.0, 0.0), DomainError);
  EXPECT_THROW(project_ground_to_image(m, 0.0, 0.0, -2.0), DomainError);
  EXPECT_NO_THROW(project_ground_to_image(m, 1.5, -1.5, 1.5));
}

TEST(RpcModel, Validation) {
  RpcModel m = identity_rpc();
  EXPECT_NO_THROW(m.validate());
  m.lat_scale = 0.0;
  EXPECT_THROW(m.validate(), ValidationError);
  m = identity_rpc();
  m.samp_den[0] = 0.0;
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(RpcInverse, IdentityModel) {
  const GeoPoint g = inverse_project(identity_rpc(), 0.3, -0.2, 0.0);
  EXPECT_NEAR(g.lat, 0.3, 1e-12);
  EXPECT_NEAR(g.lon, -0.2, 1e-12);
}

TEST(RpcInverse, RoundTripOnNearAffineModels) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const RpcModel m = near_affine_rpc(100 + k);
    for (int i = 0; i < 100; ++i) {
      const double lat = m.lat_off + m.lat_scale * u(rng);
      const double lon = m.lon_off + m.lon_scale * u(rng);
      const double h = m.height_off + m.height_scale * u(rng);
      const ImagePoint px = project_ground_to_image(m, lat, lon, h);
      const GeoPoint g = inverse_project(m, px.line, px.samp, h);
      EXPECT_LT(std::abs(g.lat - lat), 1e-9);
      EXPECT_LT(std::abs(g.lon - lon), 1e-9);
      const ImagePoint back = project_ground_to_image(m, g.lat, g.lon, h);
      EXPECT_LT(std::abs(back.line - px.line), 1e-6);
      EXPECT_LT(std::abs(back.samp - px.samp), 1e-6);
    }
  }
}

TEST(RpcInverse, SingularJacobianDoesNotConverge) {
  RpcModel m = identity_rpc();
  // line = samp = lat + lon: rank one.
  m.line_num[1] = 1.0;
  m.samp_num[2] = 1.0;
  EXPECT_THROW(inverse_project(m, 0.5, 0.3, 0.0), NoConvergence);
}

TEST(RpcViewDirection, NadirModel) {
  const RpcModel m = near_affine_rpc(1);
  RpcModel nadir = identity_rpc();
  nadir.lat_off = m.lat_off;
  nadir.lon_off = m.lon_off;
  nadir.lat_scale = nadir.lon_scale = 0.05;
  nadir.height_scale = 500.0;
  const Eigen::Vector3d d = local_view_direction(nadir, m.lat_off, m.lon_off, 0.0);
  EXPECT_NEAR(d.x(), 0.0, 1e-12);
  EXPECT_NEAR(d.y(), 0.0, 1e-12);
  EXPECT_NEAR(d.z(), -1.0, 1e-12);
}

// line = lat_n + k h_n: moving down by dh at fixed line moves north by
// k (lat_scale / height_scale) dh degrees.
TEST(RpcViewDirection, LinearParallaxAnalytic) {
  RpcModel m = identity_rpc();
  m.lat_off = 40.0;
  m.lon_off = -105.0;
  m.lat_scale = m.lon_scale = 0.05;
  m.height_scale = 500.0;
  const double k = 0.3;
  m.line_num[3] = k;
  const Eigen::Vector3d d = local_view_direction(m, 40.01, -105.02, 20.0);
  const double north_per_m =
      k * (m.lat_scale / m.height_scale) * meters_per_degree(40.01).lat;
  const Eigen::Vector3d expect = Eigen::Vector3d(0.0, north_per_m, -1.0).normalized();
  EXPECT_NEAR((d - expect).norm(), 0.0, 1e-7);
  EXPECT_LT(d.z(), 0.0);
}

TEST(RpcViewDirection, MatchesFiniteDifferenceOfInverse) {
  const RpcModel m = near_affine_rpc(7);
  const double lat = m.lat_off + 0.01, lon = m.lon_off - 0.02, h = 150.0;
  const ImagePoint px = project_ground_to_image(m, lat, lon, h);
  const GeoPoint lo = inverse_project(m, px.line, px.samp, h);
  const GeoPoint hi = inverse_project(m, px.line, px.samp, h + 10.0);
  const MetersPerDegree mpd = meters_per_degree(lat);
  const Eigen::Vector3d expect =
      Eigen::Vector3d((lo.lon - hi.lon) * mpd.lon, (lo.lat - hi.lat) * mpd.lat, -10.0)
          .normalized();
  EXPECT_NEAR((local_view_direction(m, lat, lon, h) - expect).norm(), 0.0, 1e-7);
}

TEST(RpcViewDirection, HalvingDeltaIsStable) {
  // Height enters linearly, so the constant-pixel ray is straight up to the
  // weak planar curvature.
  RpcModel m = near_affine_rpc(9);
  for (int i : {5, 6, 9, 10, 13, 16, 17, 18, 19}) {
    m.line_num[i] = m.samp_num[i] = 0.0;
    m.line_den[i] = m.samp_den[i] = 0.0;
  }
  m.line_den[3] = m.samp_den[3] = 0.0;
  const double lat = m.lat_off - 0.015, lon = m.lon_off + 0.01;
  const Eigen::Vector3d a = local_view_direction(m, lat, lon, 80.0, 10.0);
  const Eigen::Vector3d b = local_view_direction(m, lat, lon, 80.0, 5.0);
  EXPECT_LT((a - b).norm(), 1e-6);
}

TEST(RpcIo, JsonRoundTrip) {
  testing::TempDir dir;
  const RpcModel m = near_affine_rpc(3);
  write_rpc(m, dir / "v.rpc.json");
  const RpcModel back = read_rpc(dir / "v.rpc.json");
  EXPECT_EQ(back.line_num, m.line_num);
  EXPECT_EQ(back.samp_den, m.samp_den);
  EXPECT_EQ(back.lat_off, m.lat_off);
  EXPECT_EQ(back.height_scale, m.height_scale);
}

TEST(RpcIo, MalformedJsonIsFormatError) {
  testing::TempDir dir;
  testing::spit(dir / "bad.rpc.json", R"({"line_off": 1})");
  EXPECT_THROW(read_rpc(dir / "bad.rpc.json"), FormatError);
  EXPECT_THROW(read_rpc(dir / "missing.rpc.json"), IoError);
}

}  // namespace
}  // namespace crossview
