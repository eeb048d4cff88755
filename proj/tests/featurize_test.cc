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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace crossmatch {
namespace {

FeatureMap Image(int h, int w, double (*f)(int, int)) {
  std::vector<double> v;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) v.push_back(f(y, x));
  }
  return FeatureMap(1, h, w, v);
}

PixelFeaturizerConfig Bank(int orientations, double sigma) {
  PixelFeaturizerConfig cfg;
  cfg.mode = FeaturizerMode::kGradientBank;
  cfg.orientations = orientations;
  cfg.blur_sigma = sigma;
  return cfg;
}

TEST(FeaturizeTest, GrayIsIdentity) {
  std::mt19937_64 rng(1);
  const FeatureMap img = testing::RandomMap(rng, 1, 7, 9);
  const FeatureMap out = FeaturizePixels(img, PixelFeaturizerConfig{});
  EXPECT_EQ(out.channels(), 1);
  EXPECT_TRUE(std::equal(out.values().begin(), out.values().end(), img.values().begin()));
}

TEST(FeaturizeTest, ConstantImageHasNoResponse) {
  const FeatureMap img = Image(10, 12, [](int, int) { return 42.0; });
  const FeatureMap out = FeaturizePixels(img, Bank(4, 1.5));
  EXPECT_EQ(out.channels(), 4);
  for (double v : out.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(FeaturizeTest, VerticalStepEdge) {
  const FeatureMap img = Image(9, 12, [](int, int x) { return x < 6 ? 0.0 : 100.0; });
  const FeatureMap out = FeaturizePixels(img, Bank(2, 1.0));
  double across = 0.0;
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 12; ++x) {
      EXPECT_NEAR(out.at(1, y, x), 0.0, 1e-12);
      across = std::max(across, out.at(0, y, x));
    }
    EXPECT_GT(out.at(0, y, 5), 10.0);
    EXPECT_NEAR(out.at(0, y, 0), 0.0, 1e-3);
  }
  EXPECT_GT(across, 10.0);
}

TEST(FeaturizeTest, RampGivesProjectedSlopeInInterior) {
  // I = 2x + 3y; orientation k sees 2 cos(t) + 3 sin(t) with t = k pi / 6.
  const FeatureMap img = Image(20, 20, [](int y, int x) { return 2.0 * x + 3.0 * y; });
  const FeatureMap out = FeaturizePixels(img, Bank(6, 1.0));
  for (int k = 0; k < 6; ++k) {
    const double t = M_PI * k / 6.0;
    const double expected = 2.0 * std::cos(t) + 3.0 * std::sin(t);
    for (int y = 5; y < 15; ++y) {
      for (int x = 5; x < 15; ++x) EXPECT_NEAR(out.at(k, y, x), expected, 1e-9);
    }
  }
}

TEST(FeaturizeTest, InvalidPixelsSpreadByFootprint) {
  std::vector<std::uint8_t> mask(15 * 15, 1);
  mask[7 * 15 + 7] = 0;
  const FeatureMap img(1, 15, 15, std::vector<double>(225, 1.0), "", mask);
  const FeatureMap out = FeaturizePixels(img, Bank(2, 1.0));
  // radius = ceil(3 sigma) + 1 = 4
  EXPECT_FALSE(out.valid(3, 3));
  EXPECT_FALSE(out.valid(11, 11));
  EXPECT_TRUE(out.valid(2, 7));
  EXPECT_TRUE(out.valid(7, 12));
}

TEST(FeaturizeTest, Errors) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(FeaturizePixels(testing::RandomMap(rng, 2, 4, 4), PixelFeaturizerConfig{}),
               Error);
  EXPECT_THROW(FeaturizePixels(testing::RandomMap(rng, 1, 4, 4), Bank(0, 1.0)), Error);
  EXPECT_EQ(ParseFeaturizerMode("gradient-bank"), FeaturizerMode::kGradientBank);
  EXPECT_THROW(ParseFeaturizerMode("sift"), Error);
}

TEST(GaussianBlurTest, ImpulseSpreadsSymmetricallyAndKeepsMass) {
  std::vector<double> plane(21 * 21, 0.0);
  plane[10 * 21 + 10] = 1.0;
  const auto out = GaussianBlur(plane, 21, 21, 2.0);
  EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(out[10 * 21 + 13], out[13 * 21 + 10], 1e-15);
  EXPECT_NEAR(out[10 * 21 + 13], out[10 * 21 + 7], 1e-15);
  // Separable Gaussian: ratio between neighbours follows exp(-(2k+1)/(2s^2)).
  EXPECT_NEAR(out[10 * 21 + 11] / out[10 * 21 + 10], std::exp(-1.0 / 8.0), 1e-12);
  EXPECT_EQ(GaussianBlur(plane, 21, 21, 0.0), plane);
}

}  // namespace
}  // namespace crossmatch
