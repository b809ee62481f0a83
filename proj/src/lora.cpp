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

#include "crossview/lora.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "crossview/raster.hpp"
#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

std::string compose_prompt(const GeospecificPrompt& p) {
  const std::string base = trim(p.base), token = trim(p.token);
  if (token.empty()) return base;
  if (base.empty()) return token;
  return base + " " + token;
}

void LowRankAdapter::validate() const {
  const auto r = A.cols();
  if (A.rows() != W0.rows() || B.cols() != W0.cols() || B.rows() != r)
    throw DimMismatch("lora_math: adapter shapes W0 " + std::to_string(W0.rows()) +
                      "x" + std::to_string(W0.cols()) + ", A " +
                      std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                      ", B " + std::to_string(B.rows()) + "x" +
                      std::to_string(B.cols()));
  if (r > std::min(W0.rows(), W0.cols()))
    throw ValidationError("lora_math: rank exceeds min(d, k)");
}

LowRankAdapter LowRankAdapter::init(const Eigen::MatrixXd& W0, int rank,
                                    std::uint64_t seed) {
  if (rank < 0 || rank > std::min(W0.rows(), W0.cols()))
    throw ValidationError("lora_math.init: rank " + std::to_string(rank) +
                          " outside [0, min(d, k)]");
  LowRankAdapter a;
  a.W0 = W0;
  a.seed = seed;
  a.A = Eigen::MatrixXd::Zero(W0.rows(), rank);
  a.B = Eigen::MatrixXd::Zero(rank, W0.cols());
  if (rank > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(rank)));
    for (Eigen::Index i = 0; i < a.A.rows(); ++i)
      for (Eigen::Index j = 0; j < a.A.cols(); ++j) a.A(i, j) = normal(rng);
  }
  return a;
}

Eigen::VectorXd adapter_forward(const LowRankAdapter& a, const Eigen::VectorXd& x) {
  a.validate();
  if (x.size() != a.k())
    throw DimMismatch("lora_math.adapter_forward: x has " + std::to_string(x.size()) +
                      " entries, expected " + std::to_string(a.k()));
  Eigen::VectorXd h = a.W0 * x;
  if (a.rank() > 0) {
    const Eigen::VectorXd bx = a.B * x;
    h += a.A * bx;
  }
  return h;
}

AdapterGradients adapter_gradients(const LowRankAdapter& a, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& up) {
  a.validate();
  if (x.size() != a.k() || up.size() != a.d())
    throw DimMismatch("lora_math.adapter_gradients: x or upstream size mismatch");
  const Eigen::VectorXd bx = a.B * x;
  const Eigen::VectorXd atu = a.A.transpose() * up;
  return {up * bx.transpose(), atu * x.transpose()};
}

void save_adapter(const LowRankAdapter& a, const fs::path& json) {
  a.validate();
  std::string name = json.filename().string();
  const std::string suffix = ".lora.json";
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    name.resize(name.size() - suffix.size());
  const fs::path w0_name = name + ".W0.pfm";

  Raster w0 = Raster::f32(a.k(), a.d(), 1);
  for (int i = 0; i < a.d(); ++i)
    for (int j = 0; j < a.k(); ++j) w0.f32_at(j, i) = static_cast<float>(a.W0(i, j));
  write_raster(w0, json.parent_path() / w0_name);

  auto row_major = [](const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
  };
  nlohmann::ordered_json j;
  j["d"] = a.d();
  j["k"] = a.k();
  j["r"] = a.rank();
  j["A"] = row_major(a.A);
  j["B"] = row_major(a.B);
  j["seed"] = a.seed;
  j["W0"] = w0_name.string();
  std::ofstream out(json, std::ios::trunc);
  if (!out) throw IoError("lora_math: cannot write " + json.string());
  out << j.dump(2) << '\n';
}

LowRankAdapter load_adapter(const fs::path& json) {
  std::ifstream in(json);
  if (!in) throw IoError("lora_math: cannot open " + json.string());
  LowRankAdapter a;
  try {
    nlohmann::json j;
    in >> j;
    const int d = j.at("d").get<int>(), k = j.at("k").get<int>(),
              r = j.at("r").get<int>();
    auto fill = [](const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols) {
      if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols)
        throw FormatError("lora_math: matrix payload has wrong length");
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
          m(i, c) = arr[static_cast<std::size_t>(i * cols + c)].get<double>();
      return m;
    };
    a.A = fill(j.at("A"), d, r);
    a.B = fill(j.at("B"), r, k);
    a.seed = j.at("seed").get<std::uint64_t>();
    const Raster w0 = read_raster(json.parent_path() / j.at("W0").get<std::string>(),
                                  RasterFormat::kPfm32);
    if (w0.width() != k || w0.height() != d || w0.channels() != 1)
      throw DimMismatch("lora_math: W0 raster does not match d x k");
    a.W0.resize(d, k);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < k; ++c) a.W0(i, c) = w0.f32_at(c, i);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("lora_math: " + json.string() + ": " + e.what());
  }
  a.validate();
  return a;
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t < 1 || t > steps())
    throw StepOutOfRange("lora_math: step " + std::to_string(t) + " outside [1, " +
                         std::to_string(steps()) + "]");
  return alpha_bar[t - 1];
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> beta) {
  if (beta.empty())
    throw ValidationError("lora_math: schedule needs at least one step");
  NoiseSchedule s;
  double prod = 1.0;
  for (double b : beta) {
    if (!(b > 0.0 && b < 1.0))
      throw ValidationError("lora_math: beta must lie in (0, 1)");
    prod *= 1.0 - b;
    s.alpha_bar.push_back(prod);
  }
  s.beta = std::move(beta);
  return s;
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ValidationError("lora_math: steps must be >= 1");
  std::vector<double> beta(steps);
  for (int i = 0; i < steps; ++i)
    beta[i] = steps == 1 ? beta_start
                         : beta_start + (beta_end - beta_start) * i / (steps - 1);
  return from_betas(std::move(beta));
}

Eigen::VectorXd forward_noising_at(const Eigen::VectorXd& z0, double ab,
                                   const Eigen::VectorXd& eps) {
  if (z0.size() != eps.size())
    throw DimMismatch("lora_math.forward_noising: z0 and eps differ in size");
  if (!(ab >= 0.0 && ab <= 1.0))
    throw ValidationError("lora_math.forward_noising: alpha-bar outside [0, 1]");
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

Eigen::VectorXd forward_noising(const Eigen::VectorXd& z0, int t,
                                const Eigen::VectorXd& eps, const NoiseSchedule& s) {
  return forward_noising_at(z0, s.alpha_bar_at(t), eps);
}

double diffusion_loss(const Eigen::VectorXd& z0, int t, const Eigen::VectorXd& eps,
                      const DiffusionConditions& c, const NoisePredictor& predictor,
                      const NoiseSchedule& s) {
  const Eigen::VectorXd zt = forward_noising(z0, t, eps, s);
  const Eigen::VectorXd pred = predictor(zt, t, c.c_s, c.c_e, c.c_t);
  if (pred.size() != eps.size())
    throw ShapeMismatch("lora_math.diffusion_loss: predictor returned " +
                        std::to_string(pred.size()) + " values for " +
                        std::to_string(eps.size()));
  if (eps.size() == 0) return 0.0;
  return (eps - pred).squaredNorm() / static_cast<double>(eps.size());
}

}  // namespace crossview
