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

#ifndef CROSSVIEW_ERROR_HPP_
#define CROSSVIEW_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace crossview {

// Errors fall into two families. ValidationError means the caller handed us
// something that violates a precondition (bad config, missing file, wrong
// dimensions); RuntimeError means valid inputs hit a numerical or data
// condition we could not resolve. The CLI maps them to exit codes 1 and 2.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  explicit ValidationError(const std::string& what)
      : Error("ValidationError", what) {}
};

class RuntimeError : public Error {
 public:
  using Error::Error;
  explicit RuntimeError(const std::string& what)
      : Error("RuntimeError", what) {}
};

#define CROSSVIEW_DEFINE_ERROR(Name, Base)                        \
  class Name : public Base {                                     \
   public:                                                       \
    explicit Name(const std::string& what) : Base(#Name, what) {} \
  };

// raster_core
CROSSVIEW_DEFINE_ERROR(IoError, ValidationError)
CROSSVIEW_DEFINE_ERROR(FormatError, ValidationError)
CROSSVIEW_DEFINE_ERROR(OutOfBounds, ValidationError)
CROSSVIEW_DEFINE_ERROR(DimMismatch, ValidationError)
// rpc_camera
CROSSVIEW_DEFINE_ERROR(DomainError, RuntimeError)
CROSSVIEW_DEFINE_ERROR(DegenerateDenominator, RuntimeError)
CROSSVIEW_DEFINE_ERROR(NoConvergence, RuntimeError)
// geometry_refine
CROSSVIEW_DEFINE_ERROR(DegenerateRing, RuntimeError)
CROSSVIEW_DEFINE_ERROR(RegularizationRejected, RuntimeError)
CROSSVIEW_DEFINE_ERROR(InsufficientSamples, RuntimeError)
CROSSVIEW_DEFINE_ERROR(DegenerateGeometry, RuntimeError)
// texture_fusion
CROSSVIEW_DEFINE_ERROR(DisconnectedViews, RuntimeError)
CROSSVIEW_DEFINE_ERROR(SolveError, RuntimeError)
// pano_project
CROSSVIEW_DEFINE_ERROR(OriginBelowSurface, RuntimeError)
// conditioning
CROSSVIEW_DEFINE_ERROR(MissingSkyMask, ValidationError)
CROSSVIEW_DEFINE_ERROR(InsufficientTiles, RuntimeError)
// lora_math
CROSSVIEW_DEFINE_ERROR(StepOutOfRange, ValidationError)
CROSSVIEW_DEFINE_ERROR(ShapeMismatch, ValidationError)
// metrics
CROSSVIEW_DEFINE_ERROR(TooSmall, ValidationError)
// synth_scene
CROSSVIEW_DEFINE_ERROR(SpecError, ValidationError)

#undef CROSSVIEW_DEFINE_ERROR

}  // namespace crossview

#endif  // CROSSVIEW_ERROR_HPP_
