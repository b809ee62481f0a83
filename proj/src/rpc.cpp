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

#include "crossview/rpc.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>

#include "crossview/raster.hpp"
#include "json.hpp"

namespace crossview {

namespace {

constexpr double kMinDenominator = 1e-10;

double dot20(const RpcCoefficients& c, const RpcCoefficients& t) {
  double s = 0.0;
  for (int i = 0; i < 20; ++i) s += c[i] * t[i];
  return s;
}

void check_domain(double lat_n, double lon_n, double h_n, const char* op) {
  if (!(std::abs(lat_n) <= kRpcValidity && std::abs(lon_n) <= kRpcValidity &&
        std::abs(h_n) <= kRpcValidity))
    throw DomainError(std::string("rpc_camera.") + op +
                      ": normalized coordinates (" + std::to_string(lat_n) +
                      ", " + std::to_string(lon_n) + ", " +
                      std::to_string(h_n) + ") outside validity domain");
}

}  // namespace

void RpcModel::validate() const {
  for (double s : {line_scale, samp_scale, lat_scale, lon_scale, height_scale})
    if (!(s > 0.0) || !std::isfinite(s))
      throw ValidationError("rpc_camera: all scales must be > 0");
  // At the normalization center every non-constant term vanishes.
  if (std::abs(line_den[0]) < 1e-8 || std::abs(samp_den[0]) < 1e-8)
    throw ValidationError(
        "rpc_camera: denominator constant term must be nonzero");
}

RpcCoefficients rpc_terms(double L, double P, double H) {
  return {1.0,       L,         P,         H,         L * P,
          L * H,     P * H,     L * L,     P * P,     H * H,
          P * L * H, L * L * L, L * P * P, L * H * H, L * L * P,
          P * P * P, P * H * H, L * L * H, P * P * H, H * H * H};
}

Eigen::Vector2d project_normalized(const RpcModel& m, double lat_n,
                                   double lon_n, double h_n) {
  const RpcCoefficients t = rpc_terms(lon_n, lat_n, h_n);
  const double ld = dot20(m.line_den, t);
  const double sd = dot20(m.samp_den, t);
  if (std::abs(ld) < kMinDenominator || std::abs(sd) < kMinDenominator)
    throw DegenerateDenominator(
        "rpc_camera.project_ground_to_image: |denominator| < 1e-10");
  return {dot20(m.line_num, t) / ld, dot20(m.samp_num, t) / sd};
}

ImagePoint project_ground_to_image(const RpcModel& m, double lat, double lon,
                                   double h) {
  const double lat_n = (lat - m.lat_off) / m.lat_scale;
  const double lon_n = (lon - m.lon_off) / m.lon_scale;
  const double h_n = (h - m.height_off) / m.height_scale;
  check_domain(lat_n, lon_n, h_n, "project_ground_to_image");
  const Eigen::Vector2d n = project_normalized(m, lat_n, lon_n, h_n);
  return {m.line_off + m.line_scale * n.x(), m.samp_off + m.samp_scale * n.y()};
}

GeoPoint inverse_project(const RpcModel& m, double line, double samp, double h,
                         const InverseOptions& opt) {
  const Eigen::Vector2d target((line - m.line_off) / m.line_scale,
                               (samp - m.samp_off) / m.samp_scale);
  const double h_n = (h - m.height_off) / m.height_scale;

  // Unknowns are (lat_n, lon_n).
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  if (opt.initial_guess)
    x = {(opt.initial_guess->lat - m.lat_off) / m.lat_scale,
         (opt.initial_guess->lon - m.lon_off) / m.lon_scale};

  auto residual = [&](const Eigen::Vector2d& p) {
    return Eigen::Vector2d(project_normalized(m, p.x(), p.y(), h_n) - target);
  };

  Eigen::Vector2d r = residual(x);
  double rnorm = r.norm();
  int polish = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (rnorm < opt.tolerance) {
      // Newton converges quadratically; two extra steps drive the residual
      // to rounding level so round trips are far tighter than the tolerance.
      if (polish++ >= 2 || rnorm == 0.0) break;
    }
    const double s = opt.jacobian_step;
    Eigen::Matrix2d jac;
    jac.col(0) = (residual(x + Eigen::Vector2d(s, 0)) -
                  residual(x - Eigen::Vector2d(s, 0))) / (2 * s);
    jac.col(1) = (residual(x + Eigen::Vector2d(0, s)) -
                  residual(x - Eigen::Vector2d(0, s))) / (2 * s);
    const double det = jac.determinant();
    if (!(std::abs(det) > 1e-12 * std::max(1.0, jac.squaredNorm())))
      throw NoConvergence("rpc_camera.inverse_project: singular Jacobian");
    const Eigen::Vector2d step = jac.inverse() * r;

    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      const Eigen::Vector2d cand = x - lambda * step;
      const Eigen::Vector2d rc = residual(cand);
      if (rc.norm() < rnorm || (rnorm < opt.tolerance && rc.norm() <= rnorm)) {
        x = cand;
        r = rc;
        rnorm = rc.norm();
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(rnorm < opt.tolerance))
    throw NoConvergence("rpc_camera.inverse_project: residual " +
                        std::to_string(rnorm) + " after " +
                        std::to_string(opt.max_iterations) + " iterations");
  check_domain(x.x(), x.y(), h_n, "inverse_project");
  return {m.lat_off + m.lat_scale * x.x(), m.lon_off + m.lon_scale * x.y()};
}

Eigen::Vector3d local_view_direction(const RpcModel& m, double lat, double lon,
                                     double h, double delta) {
  const ImagePoint px = project_ground_to_image(m, lat, lon, h);
  InverseOptions opt;
  opt.initial_guess = GeoPoint{lat, lon};
  const GeoPoint top = inverse_project(m, px.line, px.samp, h + delta, opt);
  const MetersPerDegree mpd = meters_per_degree(lat);
  const Eigen::Vector3d d((lon - top.lon) * mpd.lon, (lat - top.lat) * mpd.lat,
                          -delta);
  return d.normalized();
}

namespace {

RpcCoefficients coeffs_from_json(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 20)
    throw FormatError(std::string("read_rpc: ") + key +
                      " must have 20 coefficients");
  RpcCoefficients c{};
  for (int i = 0; i < 20; ++i) c[i] = a[i].get<double>();
  return c;
}

}  // namespace

RpcModel read_rpc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_rpc: cannot open " + path.string());
  RpcModel m;
  try {
    nlohmann::json j;
    in >> j;
    m.line_off = j.at("line_off").get<double>();
    m.line_scale = j.at("line_scale").get<double>();
    m.samp_off = j.at("samp_off").get<double>();
    m.samp_scale = j.at("samp_scale").get<double>();
    m.lat_off = j.at("lat_off").get<double>();
    m.lat_scale = j.at("lat_scale").get<double>();
    m.lon_off = j.at("lon_off").get<double>();
    m.lon_scale = j.at("lon_scale").get<double>();
    m.height_off = j.at("height_off").get<double>();
    m.height_scale = j.at("height_scale").get<double>();
    m.line_num = coeffs_from_json(j, "line_num");
    m.line_den = coeffs_from_json(j, "line_den");
    m.samp_num = coeffs_from_json(j, "samp_num");
    m.samp_den = coeffs_from_json(j, "samp_den");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("read_rpc: " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_rpc(const RpcModel& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["line_off"] = m.line_off;
  j["line_scale"] = m.line_scale;
  j["samp_off"] = m.samp_off;
  j["samp_scale"] = m.samp_scale;
  j["lat_off"] = m.lat_off;
  j["lat_scale"] = m.lat_scale;
  j["lon_off"] = m.lon_off;
  j["lon_scale"] = m.lon_scale;
  j["height_off"] = m.height_off;
  j["height_scale"] = m.height_scale;
  j["line_num"] = m.line_num;
  j["line_den"] = m.line_den;
  j["samp_num"] = m.samp_num;
  j["samp_den"] = m.samp_den;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_rpc: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace crossview
