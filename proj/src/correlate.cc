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

#include "crossmatch/correlate.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace crossmatch {

void AlignmentConfig::Validate() const {
  if (translation_stride < 1) {
    throw Error(ErrorCode::kConfiguration, "translation stride must be >= 1");
  }
  if (!(rotation_stride > 0.0) || !std::isfinite(rotation_stride)) {
    throw Error(ErrorCode::kConfiguration, "rotation stride must be > 0");
  }
  if (!std::isfinite(rotation_min) || !std::isfinite(rotation_max) ||
      rotation_min > rotation_max) {
    throw Error(ErrorCode::kConfiguration,
                "rotation range must satisfy min <= max");
  }
  if (!(min_overlap_fraction > 0.0 && min_overlap_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfiguration,
                "min overlap fraction must lie in (0, 1]");
  }
}

std::vector<double> AlignmentConfig::Angles() const {
  Validate();
  std::vector<double> angles;
  const double span = rotation_max - rotation_min;
  const auto steps = static_cast<long>(std::floor(span / rotation_stride + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    double a = rotation_min + static_cast<double>(k) * rotation_stride;
    if (std::abs(a) < 1e-12) a = 0.0;
    angles.push_back(a);
  }
  return angles;
}

const GlobalStats* Scorer::QueryStats() const {
  return global_query ? &*global_query : nullptr;
}

const GlobalStats* Scorer::TargetStats() const {
  if (global_target) return &*global_target;
  return QueryStats();
}

std::vector<double> Scorer::ResolvedWeights(int channels) const {
  if (weights.empty()) return std::vector<double>(channels, 1.0 / channels);
  if (weights.size() != static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "scorer has " + std::to_string(weights.size()) +
                    " channel weights for " + std::to_string(channels) +
                    " channels");
  }
  return weights;
}

namespace {

void CheckSameGeometry(int h1, int w1, int h2, int w2) {
  if (h1 != h2 || w1 != w2) {
    throw Error(ErrorCode::kDimensionMismatch,
                "maps differ in size: " + std::to_string(h1) + "x" +
                    std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                    std::to_string(w2));
  }
}

void CheckPair(const FeatureMap& x, const FeatureMap& y) {
  if (x.channels() != y.channels()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "channel counts differ: " + std::to_string(x.channels()) +
                    " vs " + std::to_string(y.channels()));
  }
  CheckSameGeometry(x.height(), x.width(), y.height(), y.width());
}

double NccOverPixels(std::span<const double> x, std::span<const double> y,
                     const std::vector<std::size_t>& pixels, double epsilon) {
  const double n = static_cast<double>(pixels.size());
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i : pixels) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i : pixels) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double stdx = std::max(std::sqrt(sxx / n), epsilon);
  const double stdy = std::max(std::sqrt(syy / n), epsilon);
  return (sxy / n) / (stdx * stdy);
}

Eigen::MatrixXd InverseSqrt(const Eigen::MatrixXd& m, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical,
                std::string("eigendecomposition of ") + name +
                    " did not converge");
  }
  const Eigen::VectorXd& vals = eig.eigenvalues();
  if (vals.minCoeff() <= 0.0) {
    throw Error(ErrorCode::kNumerical,
                std::string(name) + " is not positive definite (min eigenvalue " +
                    std::to_string(vals.minCoeff()) + ", max " +
                    std::to_string(vals.maxCoeff()) + "); raise the ridge");
  }
  return eig.eigenvectors() * vals.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

double NccSingle(const ChannelView& x, const ChannelView& y,
                 const SupportRegion& region, double epsilon) {
  CheckSameGeometry(x.height, x.width, y.height, y.width);
  const ChannelView views[] = {x, y};
  const auto pixels = region.Pixels(x.height, x.width, views);
  return NccOverPixels(x.values, y.values, pixels, epsilon);
}

std::vector<double> ChannelNcc(const FeatureMap& x, const FeatureMap& y,
                               const SupportRegion& region, double epsilon) {
  CheckPair(x, y);
  std::vector<double> out(x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    out[c] = NccSingle(x.channel_view(c), y.channel_view(c), region, epsilon);
  }
  return out;
}

double Mcncc(const FeatureMap& x, const FeatureMap& y,
             const SupportRegion& region, double epsilon) {
  const auto per_channel = ChannelNcc(x, y, region, epsilon);
  double sum = 0.0;
  for (double v : per_channel) sum += v;
  return sum / static_cast<double>(per_channel.size());
}

double McnccWeighted(const FeatureMap& x, const FeatureMap& y,
                     const SupportRegion& region, const ChannelWeights& w,
                     double epsilon) {
  if (w.weights.size() != static_cast<std::size_t>(x.channels())) {
    throw Error(ErrorCode::kDimensionMismatch,
                "weight vector has " + std::to_string(w.weights.size()) +
                    " entries for " + std::to_string(x.channels()) +
                    " channels");
  }
  const auto per_channel = ChannelNcc(x, y, region, epsilon);
  double sum = 0.0;
  for (std::size_t c = 0; c < per_channel.size(); ++c) {
    sum += w.weights[c] * per_channel[c];
  }
  return sum;
}

double MultivariateTrace(const FeatureMap& x, const FeatureMap& y,
                         const SupportRegion& region,
                         std::optional<double> ridge) {
  CheckPair(x, y);
  const ChannelView views[] = {x.channel_view(0), y.channel_view(0)};
  const auto pixels = region.Pixels(x.height(), x.width(), views);
  const int channels = x.channels();
  const auto n = static_cast<Eigen::Index>(pixels.size());

  Eigen::MatrixXd xs(n, channels);
  Eigen::MatrixXd ys(n, channels);
  for (int c = 0; c < channels; ++c) {
    const auto xv = x.channel(c);
    const auto yv = y.channel(c);
    for (Eigen::Index i = 0; i < n; ++i) {
      xs(i, c) = xv[pixels[i]];
      ys(i, c) = yv[pixels[i]];
    }
  }
  xs.rowwise() -= xs.colwise().mean();
  ys.rowwise() -= ys.colwise().mean();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd sxx = (xs.transpose() * xs) * inv_n;
  Eigen::MatrixXd syy = (ys.transpose() * ys) * inv_n;
  const Eigen::MatrixXd sxy = (xs.transpose() * ys) * inv_n;

  const double rx = ridge ? *ridge : 1e-6 * sxx.trace() / channels;
  const double ry = ridge ? *ridge : 1e-6 * syy.trace() / channels;
  sxx.diagonal().array() += rx;
  syy.diagonal().array() += ry;

  const Eigen::MatrixXd m =
      InverseSqrt(sxx, "Sxx") * sxy * InverseSqrt(syy, "Syy");
  return m.trace() / channels;
}

double RegionScore(const FeatureMap& x, const FeatureMap& y,
                   const SupportRegion& region, const Scorer& scorer) {
  CheckPair(x, y);
  const auto weights = scorer.ResolvedWeights(x.channels());
  const ChannelView views[] = {x.channel_view(0), y.channel_view(0)};
  const auto pixels = region.Pixels(x.height(), x.width(), views);
  // Restrict the statistics to the shared pixel set.
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(x.plane_size()), 0);
  for (std::size_t i : pixels) mask[i] = 1;
  const SupportRegion shared(0, 0, x.height(), x.width(), std::move(mask));

  const FeatureMap xn = ApplyScheme(x, shared, scorer.scheme,
                                    scorer.QueryStats(), scorer.epsilon);
  const FeatureMap yn = ApplyScheme(y, shared, scorer.scheme,
                                    scorer.TargetStats(), scorer.epsilon);
  const double n = static_cast<double>(pixels.size());
  double score = 0.0;
  for (int c = 0; c < x.channels(); ++c) {
    const auto xv = xn.channel(c);
    const auto yv = yn.channel(c);
    double dot = 0.0;
    for (std::size_t i : pixels) dot += xv[i] * yv[i];
    score += weights[c] * (dot / n);
  }
  return score;
}

}  // namespace crossmatch
