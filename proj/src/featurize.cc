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

#include "crossmatch/featurize.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crossmatch {

FeaturizerMode ParseFeaturizerMode(const std::string& name) {
  if (name == "gray") return FeaturizerMode::kGray;
  if (name == "gradient" || name == "gradient-bank") {
    return FeaturizerMode::kGradientBank;
  }
  throw Error(ErrorCode::kConfiguration, "unknown featurizer mode '" + name + "'");
}

std::vector<double> GaussianBlur(std::span<const double> plane, int height,
                                 int width, double sigma) {
  std::vector<double> out(plane.begin(), plane.end());
  if (sigma <= 0.0) return out;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  std::vector<double> tmp(out.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, width - 1);
        acc += kernel[k + radius] * out[static_cast<std::size_t>(y) * width + xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

FeatureMap FeaturizePixels(const FeatureMap& image,
                           const PixelFeaturizerConfig& cfg) {
  if (image.channels() != 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pixel featurizer expects a single-channel image");
  }
  if (cfg.mode == FeaturizerMode::kGray) return image;
  if (cfg.orientations < 1) {
    throw Error(ErrorCode::kConfiguration, "orientation count must be >= 1");
  }
  const int h = image.height();
  const int w = image.width();
  const auto blurred = GaussianBlur(image.channel(0), h, w, cfg.blur_sigma);
  const auto at = [&](int y, int x) {
    return blurred[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w +
                   std::clamp(x, 0, w - 1)];
  };
  const std::size_t plane = image.plane_size();
  std::vector<double> values(plane * cfg.orientations);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (at(y, x + 1) - at(y, x - 1));
      const double gy = 0.5 * (at(y + 1, x) - at(y - 1, x));
      for (int k = 0; k < cfg.orientations; ++k) {
        const double theta = std::numbers::pi * k / cfg.orientations;
        values[k * plane + static_cast<std::size_t>(y) * w + x] =
            std::cos(theta) * gx + std::sin(theta) * gy;
      }
    }
  }
  std::vector<std::uint8_t> mask;
  if (image.has_mask()) {
    const int radius =
        (cfg.blur_sigma > 0.0 ? static_cast<int>(std::ceil(3.0 * cfg.blur_sigma)) : 0) + 1;
    mask.assign(plane, 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (image.valid(y, x)) continue;
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
              mask[static_cast<std::size_t>(yy) * w + xx] = 0;
            }
          }
        }
      }
    }
  }
  return FeatureMap(cfg.orientations, h, w, std::move(values),
                    image.domain_tag(), std::move(mask));
}

}  // namespace crossmatch
