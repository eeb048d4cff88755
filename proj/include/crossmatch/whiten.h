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

// PCA and CCA whitening projections.

#ifndef CROSSMATCH_WHITEN_H_
#define CROSSMATCH_WHITEN_H_

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "crossmatch/tensor.h"

namespace crossmatch {

// Affine per-pixel map x -> matrix * (x - mean), matrix is K x N.
struct Projection {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd mean;
  std::string domain_tag;

  int input_dim() const { return static_cast<int>(matrix.cols()); }
  int output_dim() const { return static_cast<int>(matrix.rows()); }

  static Projection Identity(int n, std::string domain_tag = {});
};

// Default ridge: 1e-4 times the mean diagonal of the covariance.
inline constexpr double kDefaultRidgeScale = 1e-4;

// Samples are rows. The covariance uses the population convention, so the
// projected training data has identity covariance when ridge is 0. Each
// component is sign-normalized so its largest-magnitude entry is positive.
// Throws kInvalidArgument when K > N or there are not more than K samples,
// kNumerical when a kept eigenvalue (plus ridge) is not positive.
Projection FitPca(const Eigen::MatrixXd& samples, int k, double ridge,
                  std::string domain_tag = {});

struct CcaResult {
  Projection x;  // U
  Projection y;  // V
  Eigen::VectorXd correlations;  // non-increasing
};

// Paired rows. Ridge is added to both auto-covariances before whitening.
CcaResult FitCca(const Eigen::MatrixXd& samples_x,
                 const Eigen::MatrixXd& samples_y, int k, double ridge,
                 std::string tag_x = {}, std::string tag_y = {});

// ridge = scale * mean diagonal of the sample covariance.
double RelativeRidge(const Eigen::MatrixXd& samples, double scale);

FeatureMap ApplyProjection(const FeatureMap& map, const Projection& proj);

// One row per valid pixel (channel values as columns). When max_samples is
// nonzero and smaller than the pixel count, a seeded uniform subset is drawn.
Eigen::MatrixXd PixelSamples(std::span<const FeatureMap> maps,
                             std::size_t max_samples = 0,
                             std::uint64_t seed = 0);

// Row-aligned pixel vectors from pairs of equally sized maps; a pixel is
// used when it is valid in both maps.
void PairedPixelSamples(std::span<const FeatureMap> xs,
                        std::span<const FeatureMap> ys,
                        Eigen::MatrixXd* samples_x, Eigen::MatrixXd* samples_y);

}  // namespace crossmatch

#endif  // CROSSMATCH_WHITEN_H_
