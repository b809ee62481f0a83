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

#ifndef CROSSVIEW_EDGES_HPP_
#define CROSSVIEW_EDGES_HPP_

#include "crossview/raster.hpp"

namespace crossview {

// Gradient thresholds are raw 3x3 Sobel magnitudes on 8-bit luma (the usual
// Canny convention): an ideal step of contrast c has magnitude 4c before
// smoothing.
inline constexpr double kDefaultCannyLow = 40.0;
inline constexpr double kDefaultCannyHigh = 100.0;

// Canny on luma (0.299, 0.587, 0.114): 5x5 Gaussian (sigma 1.4), Sobel,
// non-maximum suppression, 8-connected hysteresis. Integer arithmetic
// throughout, so adding a constant to every pixel leaves the result
// unchanged. Output is u8 {0, 255}. With `wrap_x` the left and right
// borders are neighbours, as on a 360 degree panorama.
Raster extract_edges(const Raster& image, double low = kDefaultCannyLow,
                     double high = kDefaultCannyHigh, bool wrap_x = false);

}  // namespace crossview

#endif  // CROSSVIEW_EDGES_HPP_
