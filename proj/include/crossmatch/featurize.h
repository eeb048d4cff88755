/* Copyright 2026 The crossmatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Built-in pixel featurizer for grayscale images.

#ifndef CROSSMATCH_FEATURIZE_H_
#define CROSSMATCH_FEATURIZE_H_

#include <span>
#include <string>
#include <vector>

#include "crossmatch/tensor.h"

namespace crossmatch {

enum class FeaturizerMode {
  kGray,          // C = 1, the image itself
  kGradientBank,  // C = orientations, oriented first derivatives
};

struct PixelFeaturizerConfig {
  FeaturizerMode mode = FeaturizerMode::kGray;
  int orientations = 4;
  double blur_sigma = 1.0;  // gradient bank only
};

FeaturizerMode ParseFeaturizerMode(const std::string& name);

// Separable Gaussian blur with replicated borders; sigma <= 0 copies.
std::vector<double> GaussianBlur(std::span<const double> plane, int height,
                                 int width, double sigma);

// `image` must have one channel. Orientation k responds to intensity change
// along angle k*180/orientations degrees (0 = along columns, i.e. a vertical
// edge). Pixels within the filter footprint of an invalid pixel are flagged
// invalid in the output.
FeatureMap FeaturizePixels(const FeatureMap& image,
                           const PixelFeaturizerConfig& cfg);

}  // namespace crossmatch

#endif  // CROSSMATCH_FEATURIZE_H_
