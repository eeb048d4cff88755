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

#include "crossmatch/normalize.h"

#include <algorithm>
#include <cmath>
#include <utility>

namespace crossmatch {

namespace {

std::string_view SourceName(StatSource s) {
  switch (s) {
    case StatSource::kNone: return "none";
    case StatSource::kLocalVolume: return "volume";
    case StatSource::kLocalChannel: return "channel";
    case StatSource::kGlobalChannel: return "global";
  }
  return "none";
}

std::optional<StatSource> ParseSource(std::string_view s) {
  if (s == "none" || s == ".") return StatSource::kNone;
  if (s == "volume") return StatSource::kLocalVolume;
  if (s == "channel") return StatSource::kLocalChannel;
  if (s == "global") return StatSource::kGlobalChannel;
  return std::nullopt;
}

}  // namespace

NormalizationScheme ParseScheme(std::string_view text) {
  struct Named {
    std::string_view name;
    NormalizationScheme scheme;
  };
  const Named presets[] = {
      {"raw", NormalizationScheme::Raw()},
      {"mu", NormalizationScheme::VolumeCentered()},
      {"mu-sigma", NormalizationScheme::VolumeStandardized()},
      {"muc", NormalizationScheme::ChannelCentered()},
      {"muc-sigmac", NormalizationScheme::Mcncc()},
      {"mcncc", NormalizationScheme::Mcncc()},
      {"gmuc", NormalizationScheme::GlobalCentered()},
      {"gmuc-gsigmac", NormalizationScheme::GlobalStandardized()},
      {"cosine", NormalizationScheme::Cosine()},
  };
  for (const auto& p : presets) {
    if (p.name == text) return p.scheme;
  }
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    const auto c = ParseSource(text.substr(0, colon));
    const auto s = ParseSource(text.substr(colon + 1));
    if (c && s) return {*c, *s};
  }
  throw Error(ErrorCode::kConfiguration,
              "unknown normalization scheme '" + std::string(text) + "'");
}

std::string SchemeName(const NormalizationScheme& scheme) {
  return std::string(SourceName(scheme.centering)) + ":" +
         std::string(SourceName(scheme.scaling));
}

std::vector<NormalizationScheme> AblationPresets() {
  return {NormalizationScheme::Raw(),
          NormalizationScheme::VolumeCentered(),
          NormalizationScheme::VolumeStandardized(),
          NormalizationScheme::ChannelCentered(),
          NormalizationScheme::Mcncc(),
          NormalizationScheme::GlobalCentered(),
          NormalizationScheme::GlobalStandardized()};
}

void GlobalStatsAccumulator::Add(const FeatureMap& map) {
  if (channels_ < 0) {
    channels_ = map.channels();
    mean_.assign(channels_, 0.0);
    m2_.assign(channels_, 0.0);
  } else if (map.channels() != channels_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dataset map has " + std::to_string(map.channels()) +
                    " channels, expected " + std::to_string(channels_));
  }
  const std::size_t plane = map.plane_size();
  const auto mask = map.mask();
  std::size_t n = 0;
  for (std::size_t i = 0; i < plane; ++i) n += mask.empty() || mask[i];
  if (n == 0) return;
  // Two-pass statistics for the map, then a pairwise merge.
  GlobalStatsAccumulator part;
  part.channels_ = channels_;
  part.count_ = n;
  part.mean_.assign(channels_, 0.0);
  part.m2_.assign(channels_, 0.0);
  for (int c = 0; c < channels_; ++c) {
    const auto v = map.channel(c);
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask.empty() || mask[i]) sum += v[i];
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask.empty() || mask[i]) ss += (v[i] - mean) * (v[i] - mean);
    }
    part.mean_[c] = mean;
    part.m2_[c] = ss;
  }
  Merge(part);
}

void GlobalStatsAccumulator::Merge(const GlobalStatsAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.channels_ != channels_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cannot merge statistics with different channel counts");
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (int c = 0; c < channels_; ++c) {
    const double delta = other.mean_[c] - mean_[c];
    mean_[c] += delta * nb / n;
    m2_[c] += other.m2_[c] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

GlobalStats GlobalStatsAccumulator::Finish() const {
  if (count_ == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "global statistics need at least one map with valid pixels");
  }
  GlobalStats out;
  out.means = mean_;
  out.stddevs.resize(mean_.size());
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    out.stddevs[c] = std::sqrt(m2_[c] / static_cast<double>(count_));
  }
  out.sample_count = count_;
  return out;
}

GlobalStats FitGlobalStats(std::span<const FeatureMap> dataset) {
  if (dataset.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot fit global statistics on an empty dataset");
  }
  GlobalStatsAccumulator acc;
  for (const FeatureMap& m : dataset) acc.Add(m);
  return acc.Finish();
}

ChannelAffine ResolveScheme(const FeatureMap& map, const SupportRegion& region,
                            const NormalizationScheme& scheme,
                            const GlobalStats* global, double epsilon) {
  const int channels = map.channels();
  if (scheme.UsesGlobal()) {
    if (global == nullptr) {
      throw Error(ErrorCode::kConfiguration,
                  "scheme " + SchemeName(scheme) +
                      " needs dataset-level statistics");
    }
    if (global->means.size() != static_cast<std::size_t>(channels) ||
        global->stddevs.size() != static_cast<std::size_t>(channels)) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "global statistics do not match the map's channel count");
    }
  }

  ChannelAffine affine;
  affine.offsets.assign(channels, 0.0);
  affine.gains.assign(channels, 1.0);
  if (scheme.centering == StatSource::kNone &&
      scheme.scaling == StatSource::kNone) {
    return affine;
  }

  const bool need_local = scheme.centering == StatSource::kLocalChannel ||
                          scheme.centering == StatSource::kLocalVolume ||
                          scheme.scaling == StatSource::kLocalChannel ||
                          scheme.scaling == StatSource::kLocalVolume;
  ChannelStats local;
  double volume_mean = 0.0;
  double volume_std = 0.0;
  if (need_local) {
    local = ComputeChannelStats(map, region);
    const double c = channels;
    for (double m : local.means) volume_mean += m;
    volume_mean /= c;
    // Pooled variance around the volume mean.
    double var = 0.0;
    for (int k = 0; k < channels; ++k) {
      const double d = local.means[k] - volume_mean;
      var += local.stddevs[k] * local.stddevs[k] + d * d;
    }
    volume_std = std::sqrt(var / c);
  }

  for (int k = 0; k < channels; ++k) {
    switch (scheme.centering) {
      case StatSource::kNone: break;
      case StatSource::kLocalVolume: affine.offsets[k] = volume_mean; break;
      case StatSource::kLocalChannel: affine.offsets[k] = local.means[k]; break;
      case StatSource::kGlobalChannel: affine.offsets[k] = global->means[k]; break;
    }
    double scale = 1.0;
    switch (scheme.scaling) {
      case StatSource::kNone: break;
      case StatSource::kLocalVolume: scale = volume_std; break;
      case StatSource::kLocalChannel: scale = local.stddevs[k]; break;
      case StatSource::kGlobalChannel: scale = global->stddevs[k]; break;
    }
    if (scheme.scaling != StatSource::kNone) {
      affine.gains[k] = 1.0 / std::max(scale, epsilon);
    }
  }
  return affine;
}

FeatureMap ApplyScheme(const FeatureMap& map, const SupportRegion& region,
                       const NormalizationScheme& scheme,
                       const GlobalStats* global, double epsilon) {
  const ChannelAffine affine =
      ResolveScheme(map, region, scheme, global, epsilon);
  if (scheme == NormalizationScheme::Raw()) return map;
  std::vector<double> out(map.values().begin(), map.values().end());
  const std::size_t plane = map.plane_size();
  for (int c = 0; c < map.channels(); ++c) {
    const double off = affine.offsets[c];
    const double gain = affine.gains[c];
    double* v = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) v[i] = (v[i] - off) * gain;
  }
  return FeatureMap(map.channels(), map.height(), map.width(), std::move(out),
                    map.domain_tag(),
                    std::vector<std::uint8_t>(map.mask().begin(),
                                              map.mask().end()));
}

}  // namespace crossmatch
