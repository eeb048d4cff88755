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

#include "crossmatch/whiten.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace crossmatch {

namespace {

Eigen::MatrixXd Covariance(const Eigen::MatrixXd& centered) {
  return (centered.transpose() * centered) /
         static_cast<double>(centered.rows());
}

Eigen::MatrixXd InverseSqrtSpd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical,
                std::string("eigendecomposition of the ") + what +
                    " covariance did not converge");
  }
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double floor = 1e-12 * std::max(vals.maxCoeff(), 1e-300);
  if (vals.minCoeff() <= floor) {
    throw Error(ErrorCode::kNumerical,
                std::string("the ") + what +
                    " covariance is rank deficient (min eigenvalue " +
                    std::to_string(vals.minCoeff()) + "); use a ridge");
  }
  return eig.eigenvectors() * vals.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Index of the entry with the largest magnitude; first one wins on ties.
Eigen::Index ArgMaxAbs(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return best;
}

}  // namespace

Projection Projection::Identity(int n, std::string domain_tag) {
  return {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n),
          std::move(domain_tag)};
}

double RelativeRidge(const Eigen::MatrixXd& samples, double scale) {
  if (samples.rows() == 0) return 0.0;
  const Eigen::MatrixXd centered =
      samples.rowwise() - samples.colwise().mean();
  return scale * Covariance(centered).diagonal().mean();
}

Projection FitPca(const Eigen::MatrixXd& samples, int k, double ridge,
                  std::string domain_tag) {
  const auto n = samples.rows();
  const auto dim = samples.cols();
  if (k < 1 || k > dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "PCA needs 1 <= K <= N, got K=" + std::to_string(k) +
                    " N=" + std::to_string(dim));
  }
  if (n <= k) {
    throw Error(ErrorCode::kInvalidArgument,
                "PCA needs more samples than components (" +
                    std::to_string(n) + " <= " + std::to_string(k) + ")");
  }
  if (ridge < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "ridge must be nonnegative");
  }
  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = Covariance(centered);
  cov.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "PCA eigendecomposition did not converge");
  }
  const Eigen::VectorXd& vals = eig.eigenvalues();  // ascending
  const double floor = 1e-10 * std::max(vals.maxCoeff(), 1e-300);

  Projection proj;
  proj.matrix.resize(k, dim);
  proj.mean = mean;
  proj.domain_tag = std::move(domain_tag);
  for (int r = 0; r < k; ++r) {
    const Eigen::Index idx = dim - 1 - r;
    const double lambda = vals[idx];
    if (!(lambda > floor)) {
      throw Error(ErrorCode::kNumerical,
                  "covariance is rank deficient at component " +
                      std::to_string(r) + " (eigenvalue " +
                      std::to_string(lambda) + "); use a ridge");
    }
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    if (v[ArgMaxAbs(v)] < 0.0) v = -v;
    proj.matrix.row(r) = v.transpose() / std::sqrt(lambda);
  }
  return proj;
}

CcaResult FitCca(const Eigen::MatrixXd& samples_x,
                 const Eigen::MatrixXd& samples_y, int k, double ridge,
                 std::string tag_x, std::string tag_y) {
  const auto n = samples_x.rows();
  if (samples_y.rows() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "CCA needs paired samples; got " + std::to_string(n) + " and " +
                    std::to_string(samples_y.rows()) + " rows");
  }
  const auto nx = samples_x.cols();
  const auto ny = samples_y.cols();
  if (k < 1 || k > nx || k > ny) {
    throw Error(ErrorCode::kInvalidArgument,
                "CCA needs 1 <= K <= min(Nx, Ny), got K=" + std::to_string(k));
  }
  if (n < k + 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "CCA needs at least K + 2 pairs, got " + std::to_string(n));
  }
  if (ridge < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "ridge must be nonnegative");
  }
  const Eigen::VectorXd mx = samples_x.colwise().mean().transpose();
  const Eigen::VectorXd my = samples_y.colwise().mean().transpose();
  const Eigen::MatrixXd xc = samples_x.rowwise() - mx.transpose();
  const Eigen::MatrixXd yc = samples_y.rowwise() - my.transpose();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd cxx = (xc.transpose() * xc) * inv_n;
  Eigen::MatrixXd cyy = (yc.transpose() * yc) * inv_n;
  const Eigen::MatrixXd cxy = (xc.transpose() * yc) * inv_n;
  cxx.diagonal().array() += ridge;
  cyy.diagonal().array() += ridge;

  const Eigen::MatrixXd wx = InverseSqrtSpd(cxx, "x");
  const Eigen::MatrixXd wy = InverseSqrtSpd(cyy, "y");
  const Eigen::MatrixXd m = wx * cxy * wy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);

  CcaResult out;
  out.x.matrix = svd.matrixU().leftCols(k).transpose() * wx;
  out.y.matrix = svd.matrixV().leftCols(k).transpose() * wy;
  out.x.mean = mx;
  out.y.mean = my;
  out.x.domain_tag = std::move(tag_x);
  out.y.domain_tag = std::move(tag_y);
  out.correlations = svd.singularValues().head(k);
  for (int r = 0; r < k; ++r) {
    const Eigen::VectorXd row = out.x.matrix.row(r).transpose();
    if (row[ArgMaxAbs(row)] < 0.0) {
      out.x.matrix.row(r) *= -1.0;
      out.y.matrix.row(r) *= -1.0;
    }
  }
  return out;
}

FeatureMap ApplyProjection(const FeatureMap& map, const Projection& proj) {
  if (map.channels() != proj.input_dim() ||
      proj.mean.size() != proj.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "projection expects " + std::to_string(proj.input_dim()) +
                    " channels, map has " + std::to_string(map.channels()));
  }
  const auto plane = static_cast<Eigen::Index>(map.plane_size());
  // Channel-major storage is a column-major (plane x C) matrix.
  const Eigen::Map<const Eigen::MatrixXd> in(map.values().data(), plane,
                                             map.channels());
  std::vector<double> values(static_cast<std::size_t>(plane) *
                             proj.output_dim());
  Eigen::Map<Eigen::MatrixXd> out(values.data(), plane, proj.output_dim());
  out.noalias() = (in.rowwise() - proj.mean.transpose()) *
                  proj.matrix.transpose();
  return FeatureMap(proj.output_dim(), map.height(), map.width(),
                    std::move(values),
                    proj.domain_tag.empty() ? map.domain_tag() : proj.domain_tag,
                    std::vector<std::uint8_t>(map.mask().begin(),
                                              map.mask().end()));
}

Eigen::MatrixXd PixelSamples(std::span<const FeatureMap> maps,
                             std::size_t max_samples, std::uint64_t seed) {
  if (maps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no maps to sample pixels from");
  }
  const int channels = maps[0].channels();
  std::vector<std::pair<std::size_t, std::size_t>> refs;  // (map, pixel)
  for (std::size_t m = 0; m < maps.size(); ++m) {
    if (maps[m].channels() != channels) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "maps disagree on channel count");
    }
    for (std::size_t i = 0; i < maps[m].plane_size(); ++i) {
      const auto mask = maps[m].mask();
      if (mask.empty() || mask[i]) refs.emplace_back(m, i);
    }
  }
  if (max_samples > 0 && refs.size() > max_samples) {
    std::mt19937_64 rng(seed);
    std::shuffle(refs.begin(), refs.end(), rng);
    refs.resize(max_samples);
    std::sort(refs.begin(), refs.end());
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), channels);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const FeatureMap& map = maps[refs[r].first];
    for (int c = 0; c < channels; ++c) {
      out(static_cast<Eigen::Index>(r), c) = map.channel(c)[refs[r].second];
    }
  }
  return out;
}

void PairedPixelSamples(std::span<const FeatureMap> xs,
                        std::span<const FeatureMap> ys,
                        Eigen::MatrixXd* samples_x,
                        Eigen::MatrixXd* samples_y) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "paired sampling needs two equally long, nonempty map lists");
  }
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  for (std::size_t m = 0; m < xs.size(); ++m) {
    if (xs[m].height() != ys[m].height() || xs[m].width() != ys[m].width() ||
        xs[m].channels() != xs[0].channels() ||
        ys[m].channels() != ys[0].channels()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "paired maps must share geometry and channel counts");
    }
    for (int y = 0; y < xs[m].height(); ++y) {
      for (int x = 0; x < xs[m].width(); ++x) {
        if (xs[m].valid(y, x) && ys[m].valid(y, x)) {
          refs.emplace_back(m, static_cast<std::size_t>(y) * xs[m].width() + x);
        }
      }
    }
  }
  const auto rows = static_cast<Eigen::Index>(refs.size());
  samples_x->resize(rows, xs[0].channels());
  samples_y->resize(rows, ys[0].channels());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto [m, i] = refs[static_cast<std::size_t>(r)];
    for (int c = 0; c < xs[m].channels(); ++c) (*samples_x)(r, c) = xs[m].channel(c)[i];
    for (int c = 0; c < ys[m].channels(); ++c) (*samples_y)(r, c) = ys[m].channel(c)[i];
  }
}

}  // namespace crossmatch
