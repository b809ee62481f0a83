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

#ifndef CROSSVIEW_RPC_HPP_
#define CROSSVIEW_RPC_HPP_

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>

#include "crossview/error.hpp"

namespace crossview {

using RpcCoefficients = std::array<double, 20>;

// Rational polynomial camera. Coefficients follow the RPC00B term order
//   1, L, P, H, LP, LH, PH, L^2, P^2, H^2,
//   PLH, L^3, LP^2, LH^2, L^2P, P^3, PH^2, L^2H, P^2H, H^3
// with L, P, H the normalized longitude, latitude and height.
struct RpcModel {
  RpcCoefficients line_num{};
  RpcCoefficients line_den{};
  RpcCoefficients samp_num{};
  RpcCoefficients samp_den{};
  double line_off = 0.0, line_scale = 1.0;
  double samp_off = 0.0, samp_scale = 1.0;
  double lat_off = 0.0, lat_scale = 1.0;
  double lon_off = 0.0, lon_scale = 1.0;
  double height_off = 0.0, height_scale = 1.0;

  void validate() const;
};

struct ImagePoint {
  double line = 0.0;
  double samp = 0.0;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Normalized coordinates beyond this magnitude raise DomainError.
inline constexpr double kRpcValidity = 1.5;

// The 20 cubic monomials in RPC00B order.
RpcCoefficients rpc_terms(double lon_n, double lat_n, double h_n);

// Forward projection (lat/lon in degrees, h in meters) to line/sample pixels.
ImagePoint project_ground_to_image(const RpcModel& model, double lat,
                                   double lon, double h);

// Normalized-space forward map without validity checks. Returns
// (line_n, samp_n) for the normalized geodetic input.
Eigen::Vector2d project_normalized(const RpcModel& model, double lat_n,
                                   double lon_n, double h_n);

struct InverseOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;       // normalized image units
  double jacobian_step = 1e-6;   // central-difference step, normalized
  std::optional<GeoPoint> initial_guess;  // degrees; default: the RPC center
};

// Ground position at fixed height whose projection is (line, samp).
// Damped Newton on the normalized 2x2 system.
GeoPoint inverse_project(const RpcModel& model, double line, double samp,
                         double h, const InverseOptions& options = {});

// Unit direction (east, north, up) of the line of sight through the point,
// pointing from the sensor toward the ground (z < 0 for physical models).
// Obtained by intersecting the constant-(line, samp) ray with the heights
// h and h + delta.
Eigen::Vector3d local_view_direction(const RpcModel& model, double lat,
                                     double lon, double h,
                                     double delta = 10.0);

// `<image>.rpc.json`
RpcModel read_rpc(const std::filesystem::path& path);
void write_rpc(const RpcModel& model, const std::filesystem::path& path);

}  // namespace crossview

#endif  // CROSSVIEW_RPC_HPP_
