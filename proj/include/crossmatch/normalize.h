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

// Centering / scaling policies used by the normalization ablation.

#ifndef CROSSMATCH_NORMALIZE_H_
#define CROSSMATCH_NORMALIZE_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crossmatch/tensor.h"

namespace crossmatch {

// Where the statistic used by a centering or scaling step comes from.
enum class StatSource {
  kNone,           // operation skipped
  kLocalVolume,    // one value over all channels and region pixels
  kLocalChannel,   // one value per channel over region pixels
  kGlobalChannel,  // one value per channel over the whole dataset
};

struct NormalizationScheme {
  StatSource centering = StatSource::kNone;
  StatSource scaling = StatSource::kNone;

  bool UsesGlobal() const {
    return centering == StatSource::kGlobalChannel ||
           scaling == StatSource::kGlobalChannel;
  }
  bool operator==(const NormalizationScheme&) const = default;

  // Presets, written as [centering, scaling].
  static NormalizationScheme Raw() { return {}; }  // [.,.]
  static NormalizationScheme VolumeCentered() {    // [mu,.]
    return {StatSource::kLocalVolume, StatSource::kNone};
  }
  static NormalizationScheme VolumeStandardized() {  // [mu,sigma]
    return {StatSource::kLocalVolume, StatSource::kLocalVolume};
  }
  static NormalizationScheme ChannelCentered() {  // [mu_c,.]
    return {StatSource::kLocalChannel, StatSource::kNone};
  }
  static NormalizationScheme Mcncc() {  // [mu_c,sigma_c]
    return {StatSource::kLocalChannel, StatSource::kLocalChannel};
  }
  static NormalizationScheme GlobalCentered() {  // [mu-bar_c,.]
    return {StatSource::kGlobalChannel, StatSource::kNone};
  }
  static NormalizationScheme GlobalStandardized() {  // [mu-bar_c,sigma-bar_c]
    return {StatSource::kGlobalChannel, StatSource::kGlobalChannel};
  }
  // Cosine-similarity baseline: volume sigma without centering.
  static NormalizationScheme Cosine() {
    return {StatSource::kNone, StatSource::kLocalVolume};
  }
};

// Accepts preset names (raw, mu, mu-sigma, muc, mcncc / muc-sigmac, gmuc,
// gmuc-gsigmac, cosine) or an explicit "centering:scaling" pair over
// {none, volume, channel, global}. Throws kConfiguration otherwise.
NormalizationScheme ParseScheme(std::string_view text);
std::string SchemeName(const NormalizationScheme& scheme);

// The seven presets of the ablation lattice, in presentation order.
std::vector<NormalizationScheme> AblationPresets();

struct GlobalStats {
  std::vector<double> means;
  std::vector<double> stddevs;
  std::size_t sample_count = 0;  // pixels pooled
};

// Streaming pooled per-channel statistics (Chan et al. parallel merge).
class GlobalStatsAccumulator {
 public:
  void Add(const FeatureMap& map);
  void Merge(const GlobalStatsAccumulator& other);
  // Throws kInvalidArgument if nothing was added.
  GlobalStats Finish() const;

 private:
  int channels_ = -1;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

// Pools every valid pixel of every map. Throws on an empty dataset or a
// channel-count mismatch.
GlobalStats FitGlobalStats(std::span<const FeatureMap> dataset);

// Per-channel affine transform (x - offset_c) * gain_c.
struct ChannelAffine {
  std::vector<double> offsets;
  std::vector<double> gains;
};

// Resolves the scheme to a per-channel affine transform. Local statistics
// come from the region; global schemes require `global`.
ChannelAffine ResolveScheme(const FeatureMap& map, const SupportRegion& region,
                            const NormalizationScheme& scheme,
                            const GlobalStats* global,
                            double epsilon = kDefaultEpsilon);

FeatureMap ApplyScheme(const FeatureMap& map, const SupportRegion& region,
                       const NormalizationScheme& scheme,
                       const GlobalStats* global,
                       double epsilon = kDefaultEpsilon);

}  // namespace crossmatch

#endif  // CROSSMATCH_NORMALIZE_H_
