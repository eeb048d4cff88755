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

#include "crossmatch/tensor.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace crossmatch {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBounds: return "bounds";
    case ErrorCode::kDegenerateRegion: return "degenerate_region";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kEmptySearch: return "empty_search";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

FeatureMap::FeatureMap(int channels, int height, int width,
                       std::vector<double> values, std::string domain_tag,
                       std::vector<std::uint8_t> mask)
    : channels_(channels),
      height_(height),
      width_(width),
      values_(std::move(values)),
      domain_tag_(std::move(domain_tag)),
      mask_(std::move(mask)) {
  if (channels < 1 || height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature map dimensions must be positive, got " +
                    std::to_string(channels) + "x" + std::to_string(height) +
                    "x" + std::to_string(width));
  }
  const std::size_t expected =
      static_cast<std::size_t>(channels) * height * width;
  if (values_.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature map expects " + std::to_string(expected) +
                    " values, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite feature value at index " + std::to_string(i));
    }
  }
  if (!mask_.empty()) {
    if (mask_.size() != plane_size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "validity mask size does not match the map plane");
    }
    // A mask with every pixel valid is the same as no mask.
    if (std::all_of(mask_.begin(), mask_.end(),
                    [](std::uint8_t m) { return m != 0; })) {
      mask_.clear();
    }
  }
}

FeatureMap FeatureMap::Zeros(int channels, int height, int width,
                             std::string domain_tag) {
  if (channels < 1 || height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature map dimensions must be positive");
  }
  return FeatureMap(channels, height, width,
                    std::vector<double>(static_cast<std::size_t>(channels) *
                                        height * width),
                    std::move(domain_tag));
}

std::size_t FeatureMap::valid_count() const {
  if (mask_.empty()) return plane_size();
  return static_cast<std::size_t>(
      std::count_if(mask_.begin(), mask_.end(),
                    [](std::uint8_t m) { return m != 0; }));
}

FeatureMap FeatureMap::WithTag(std::string tag) const {
  FeatureMap out = *this;
  out.domain_tag_ = std::move(tag);
  return out;
}

FeatureMap FeatureMap::WithoutMask() const {
  FeatureMap out = *this;
  out.mask_.clear();
  return out;
}

SupportRegion::SupportRegion(int top, int left, int height, int width,
                             std::vector<std::uint8_t> mask)
    : top_(top), left_(left), height_(height), width_(width),
      mask_(std::move(mask)) {
  if (height < 0 || width < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "support region extent must be nonnegative");
  }
  if (!mask_.empty() &&
      mask_.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::kInvalidArgument,
                "support region mask size does not match its rectangle");
  }
}

SupportRegion SupportRegion::Full(const FeatureMap& map) {
  std::vector<std::uint8_t> mask(map.mask().begin(), map.mask().end());
  return SupportRegion(0, 0, map.height(), map.width(), std::move(mask));
}

bool SupportRegion::contains(int y, int x) const {
  if (y < top_ || x < left_ || y >= top_ + height_ || x >= left_ + width_) {
    return false;
  }
  return mask_.empty() ||
         mask_[static_cast<std::size_t>(y - top_) * width_ + (x - left_)] != 0;
}

void SupportRegion::CheckInside(int map_height, int map_width) const {
  if (top_ < 0 || left_ < 0 || top_ + height_ > map_height ||
      left_ + width_ > map_width) {
    throw Error(ErrorCode::kBounds,
                "support region [" + std::to_string(top_) + "," +
                    std::to_string(left_) + " " + std::to_string(height_) +
                    "x" + std::to_string(width_) + "] leaves a " +
                    std::to_string(map_height) + "x" +
                    std::to_string(map_width) + " map");
  }
}

std::vector<std::size_t> SupportRegion::Pixels(
    int map_height, int map_width, std::span<const ChannelView> views) const {
  CheckInside(map_height, map_width);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(height_) * width_);
  for (int y = top_; y < top_ + height_; ++y) {
    for (int x = left_; x < left_ + width_; ++x) {
      if (!mask_.empty() &&
          mask_[static_cast<std::size_t>(y - top_) * width_ + (x - left_)] ==
              0) {
        continue;
      }
      bool ok = true;
      for (const ChannelView& v : views) ok = ok && v.valid(y, x);
      if (ok) out.push_back(static_cast<std::size_t>(y) * map_width + x);
    }
  }
  if (out.size() < 2) {
    throw Error(ErrorCode::kDegenerateRegion,
                "support region has " + std::to_string(out.size()) +
                    " usable pixels; at least 2 are required");
  }
  return out;
}

ChannelStats ComputeChannelStats(const FeatureMap& map,
                                 const SupportRegion& region) {
  const ChannelView view = map.channel_view(0);
  const auto pixels =
      region.Pixels(map.height(), map.width(), std::span(&view, 1));
  const double n = static_cast<double>(pixels.size());
  ChannelStats stats;
  stats.support_size = pixels.size();
  stats.means.resize(map.channels());
  stats.stddevs.resize(map.channels());
  for (int c = 0; c < map.channels(); ++c) {
    const auto plane = map.channel(c);
    double sum = 0.0;
    for (std::size_t i : pixels) sum += plane[i];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i : pixels) {
      const double d = plane[i] - mean;
      ss += d * d;
    }
    stats.means[c] = mean;
    stats.stddevs[c] = std::sqrt(ss / n);
  }
  return stats;
}

FeatureMap Standardize(const FeatureMap& map, const SupportRegion& region,
                       const ChannelStats& stats, double epsilon) {
  const auto channels = static_cast<std::size_t>(map.channels());
  if (stats.means.size() != channels || stats.stddevs.size() != channels) {
    throw Error(ErrorCode::kDimensionMismatch,
                "channel statistics do not match the map's channel count");
  }
  region.CheckInside(map.height(), map.width());
  std::vector<double> out(map.values().begin(), map.values().end());
  const std::size_t plane = map.plane_size();
  for (std::size_t c = 0; c < channels; ++c) {
    const double mean = stats.means[c];
    const double scale = 1.0 / std::max(stats.stddevs[c], epsilon);
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out[c * plane + i];
      v = (v - mean) * scale;
    }
  }
  return FeatureMap(map.channels(), map.height(), map.width(), std::move(out),
                    map.domain_tag(),
                    std::vector<std::uint8_t>(map.mask().begin(),
                                              map.mask().end()));
}

namespace {

// cos/sin with exact values at multiples of 90 degrees.
std::pair<double, double> CosSinDegrees(double degrees) {
  const double quarter = degrees / 90.0;
  if (quarter == std::round(quarter)) {
    const long q = ((static_cast<long>(std::round(quarter)) % 4) + 4) % 4;
    constexpr double kCos[] = {1.0, 0.0, -1.0, 0.0};
    constexpr double kSin[] = {0.0, 1.0, 0.0, -1.0};
    return {kCos[q], kSin[q]};
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace

FeatureMap Rotate(const FeatureMap& map, double angle_degrees) {
  if (!std::isfinite(angle_degrees)) {
    throw Error(ErrorCode::kInvalidArgument, "rotation angle must be finite");
  }
  if (angle_degrees == 0.0) return map;

  const int h = map.height();
  const int w = map.width();
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;
  const auto [cs, sn] = CosSinDegrees(angle_degrees);
  constexpr double kSnap = 1e-9;

  const std::size_t plane = map.plane_size();
  std::vector<double> out(map.size(), 0.0);
  std::vector<std::uint8_t> mask(plane, 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ox = x - cx;
      const double oy = y - cy;
      double sx = cs * ox - sn * oy + cx;
      double sy = sn * ox + cs * oy + cy;
      if (sx < -kSnap || sy < -kSnap || sx > (w - 1) + kSnap ||
          sy > (h - 1) + kSnap) {
        continue;
      }
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      // Snap near-integer coordinates so that axis-aligned rotations do not
      // pick up interpolation weight from neighbours.
      if (std::abs(sx - std::round(sx)) < kSnap) sx = std::round(sx);
      if (std::abs(sy - std::round(sy)) < kSnap) sy = std::round(sy);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      const int x1 = fx > 0.0 ? x0 + 1 : x0;
      const int y1 = fy > 0.0 ? y0 + 1 : y0;
      if (!map.valid(y0, x0) || !map.valid(y0, x1) || !map.valid(y1, x0) ||
          !map.valid(y1, x1)) {
        continue;
      }
      const std::size_t dst = static_cast<std::size_t>(y) * w + x;
      mask[dst] = 1;
      const double w00 = (1 - fy) * (1 - fx);
      const double w01 = (1 - fy) * fx;
      const double w10 = fy * (1 - fx);
      const double w11 = fy * fx;
      for (int c = 0; c < map.channels(); ++c) {
        out[c * plane + dst] = w00 * map.at(c, y0, x0) +
                               w01 * map.at(c, y0, x1) +
                               w10 * map.at(c, y1, x0) +
                               w11 * map.at(c, y1, x1);
      }
    }
  }
  return FeatureMap(map.channels(), h, w, std::move(out), map.domain_tag(),
                    std::move(mask));
}

FeatureMap ExtractPatch(const FeatureMap& map, int top, int left, int h,
                        int w) {
  if (h < 1 || w < 1 || top < 0 || left < 0 || top + h > map.height() ||
      left + w > map.width()) {
    throw Error(ErrorCode::kBounds,
                "patch [" + std::to_string(top) + "," + std::to_string(left) +
                    " " + std::to_string(h) + "x" + std::to_string(w) +
                    "] leaves a " + std::to_string(map.height()) + "x" +
                    std::to_string(map.width()) + " map");
  }
  std::vector<double> out(static_cast<std::size_t>(map.channels()) * h * w);
  std::vector<std::uint8_t> mask;
  if (map.has_mask()) mask.resize(static_cast<std::size_t>(h) * w);
  for (int c = 0; c < map.channels(); ++c) {
    const auto src = map.channel(c);
    for (int y = 0; y < h; ++y) {
      const std::size_t s = static_cast<std::size_t>(top + y) * map.width() + left;
      std::copy_n(src.begin() + s, w,
                  out.begin() + (static_cast<std::size_t>(c) * h + y) * w);
    }
  }
  if (!mask.empty()) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        mask[static_cast<std::size_t>(y) * w + x] =
            map.valid(top + y, left + x) ? 1 : 0;
      }
    }
  }
  return FeatureMap(map.channels(), h, w, std::move(out), map.domain_tag(),
                    std::move(mask));
}

}  // namespace crossmatch
