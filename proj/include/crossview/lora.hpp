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

#ifndef CROSSVIEW_LORA_HPP_
#define CROSSVIEW_LORA_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crossview/error.hpp"

namespace crossview {

struct GeospecificPrompt {
  std::string base;
  std::string token;
};

// Trimmed base and token joined by one space; an empty token leaves the
// base alone.
std::string compose_prompt(const GeospecificPrompt& prompt);

// h = W0 x + A (B x), W0 frozen.
struct LowRankAdapter {
  Eigen::MatrixXd W0;  // d x k
  Eigen::MatrixXd A;   // d x r
  Eigen::MatrixXd B;   // r x k
  std::uint64_t seed = 0;

  int d() const { return static_cast<int>(W0.rows()); }
  int k() const { return static_cast<int>(W0.cols()); }
  int rank() const { return static_cast<int>(A.cols()); }
  void validate() const;

  // A ~ N(0, 1/sqrt(r)) from `seed`, B = 0.
  static LowRankAdapter init(const Eigen::MatrixXd& W0, int rank,
                             std::uint64_t seed);
};

Eigen::VectorXd adapter_forward(const LowRankAdapter& adapter,
                                const Eigen::VectorXd& x);

struct AdapterGradients {
  Eigen::MatrixXd dA;
  Eigen::MatrixXd dB;
};

// Gradients of <upstream, h> with respect to A and B.
AdapterGradients adapter_gradients(const LowRankAdapter& adapter,
                                   const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& upstream);

// `<name>.lora.json` plus W0 as a PFM next to it.
void save_adapter(const LowRankAdapter& adapter, const std::filesystem::path& json);
LowRankAdapter load_adapter(const std::filesystem::path& json);

struct NoiseSchedule {
  std::vector<double> beta;       // beta[t - 1] for step t
  std::vector<double> alpha_bar;  // cumulative product of (1 - beta)

  int steps() const { return static_cast<int>(beta.size()); }
  double alpha_bar_at(int t) const;  // 1 <= t <= T

  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 2e-2);
  static NoiseSchedule from_betas(std::vector<double> beta);
};

// z_t = sqrt(ab) z0 + sqrt(1 - ab) eps
Eigen::VectorXd forward_noising_at(const Eigen::VectorXd& z0, double alpha_bar,
                                   const Eigen::VectorXd& eps);
Eigen::VectorXd forward_noising(const Eigen::VectorXd& z0, int t,
                                const Eigen::VectorXd& eps,
                                const NoiseSchedule& schedule);

// Opaque encoder outputs: spatial, edge and text conditions.
struct DiffusionConditions {
  Eigen::VectorXd c_s;
  Eigen::VectorXd c_e;
  Eigen::VectorXd c_t;
};

using NoisePredictor = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& c_s,
    const Eigen::VectorXd& c_e, const Eigen::VectorXd& c_t)>;

// Mean squared error between eps and the predictor's output at z_t.
double diffusion_loss(const Eigen::VectorXd& z0, int t,
                      const Eigen::VectorXd& eps,
                      const DiffusionConditions& conditions,
                      const NoisePredictor& predictor,
                      const NoiseSchedule& schedule);

}  // namespace crossview

#endif  // CROSSVIEW_LORA_HPP_
