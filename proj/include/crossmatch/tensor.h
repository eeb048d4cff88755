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

// Feature-map container, support regions and per-region channel statistics.
//
// Layout is fixed for the whole project: values are stored channel-major,
// and each channel plane is row-major, i.e. value(c, y, x) lives at
// (c * height + y) * width + x.

#ifndef CROSSMATCH_TENSOR_H_
#define CROSSMATCH_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crossmatch/error.h"

namespace crossmatch {

// Default floor applied to standard deviations before division.
inline constexpr double kDefaultEpsilon = 1e-5;

// Read-only view of one channel plane together with its validity mask.
struct ChannelView {
  std::span<const double> values;
  int height = 0;
  int width = 0;
  // Empty means every pixel is valid.
  std::span<const std::uint8_t> mask;

  bool valid(int y, int x) const {
    return mask.empty() || mask[static_cast<std::size_t>(y) * width + x] != 0;
  }
  double at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

// C-channel 2-D feature tensor. Immutable after construction.
class FeatureMap {
 public:
  FeatureMap() = default;

  // Throws kInvalidArgument on zero dimensions, a wrong value count,
  // non-finite values or a mask of the wrong size.
  FeatureMap(int channels, int height, int width, std::vector<double> values,
             std::string domain_tag = {}, std::vector<std::uint8_t> mask = {});

  static FeatureMap Zeros(int channels, int height, int width,
                          std::string domain_tag = {});

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  std::span<const double> channel(int c) const {
    return std::span<const double>(values_).subspan(c * plane_size(),
                                                    plane_size());
  }
  ChannelView channel_view(int c) const {
    return {channel(c), height_, width_, mask_};
  }
  double at(int c, int y, int x) const {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  const std::string& domain_tag() const { return domain_tag_; }

  // Validity mask over pixels (row-major); empty when every pixel is valid.
  std::span<const std::uint8_t> mask() const { return mask_; }
  bool has_mask() const { return !mask_.empty(); }
  bool valid(int y, int x) const {
    return mask_.empty() ||
           mask_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  std::size_t valid_count() const;

  FeatureMap WithTag(std::string tag) const;
  FeatureMap WithoutMask() const;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
  std::string domain_tag_;
  std::vector<std::uint8_t> mask_;
};

// Rectangle of pixel positions, optionally restricted further by a mask laid
// out row-major over the rectangle. Pixels flagged invalid in the map a
// region is used with are always excluded as well.
class SupportRegion {
 public:
  SupportRegion() = default;
  SupportRegion(int top, int left, int height, int width,
                std::vector<std::uint8_t> mask = {});

  // Whole map, restricted to the map's validity mask.
  static SupportRegion Full(const FeatureMap& map);

  int top() const { return top_; }
  int left() const { return left_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const std::uint8_t> mask() const { return mask_; }

  bool contains(int y, int x) const;

  // Throws kBounds if the rectangle leaves a height x width map.
  void CheckInside(int map_height, int map_width) const;

  // Row-major linear pixel indices (into a map of the given width) that
  // belong to the region and are valid in every supplied view. Throws
  // kBounds / kDegenerateRegion when fewer than two pixels remain.
  std::vector<std::size_t> Pixels(int map_height, int map_width,
                                  std::span<const ChannelView> views = {}) const;

 private:
  int top_ = 0;
  int left_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> mask_;
};

struct ChannelStats {
  std::vector<double> means;
  std::vector<double> stddevs;
  std::size_t support_size = 0;
};

// Per-channel mean and population standard deviation over the region.
ChannelStats ComputeChannelStats(const FeatureMap& map,
                                 const SupportRegion& region);

// (x - mean_c) / max(stddev_c, epsilon), applied to every pixel of the map.
FeatureMap Standardize(const FeatureMap& map, const SupportRegion& region,
                       const ChannelStats& stats,
                       double epsilon = kDefaultEpsilon);

// Bilinear rotation about the map center. Positive angles rotate the content
// counter-clockwise as displayed (rows growing downwards). Output pixels whose
// source falls outside the input, or next to an invalid input pixel, are
// zeroed and flagged invalid.
FeatureMap Rotate(const FeatureMap& map, double angle_degrees);

// Copies an h x w window; the validity mask and domain tag come along.
FeatureMap ExtractPatch(const FeatureMap& map, int top, int left, int h, int w);

}  // namespace crossmatch

#endif  // CROSSMATCH_TENSOR_H_
