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

// Correlation scores between feature maps and the dense alignment search.

#ifndef CROSSMATCH_CORRELATE_H_
#define CROSSMATCH_CORRELATE_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "crossmatch/normalize.h"
#include "crossmatch/tensor.h"

namespace crossmatch {

// Per-channel importance weights W and the decision bias b. The bias never
// enters a similarity score; only the hinge loss uses it.
struct ChannelWeights {
  std::vector<double> weights;
  double bias = 0.0;

  static ChannelWeights Uniform(int channels) {
    return {std::vector<double>(channels, 1.0 / channels), 0.0};
  }
};

struct AlignmentConfig {
  int translation_stride = 1;
  double rotation_min = 0.0;
  double rotation_max = 0.0;
  double rotation_stride = 4.0;
  double min_overlap_fraction = 0.5;

  // Throws kConfiguration when a field is out of range.
  void Validate() const;
  // rotation_min, rotation_min + stride, ... up to rotation_max.
  std::vector<double> Angles() const;
};

struct MatchScore {
  double score = 0.0;
  int dy = 0;  // row of the query origin in target coordinates
  int dx = 0;  // column of the query origin in target coordinates
  double angle = 0.0;
  std::size_t overlap = 0;  // |P|
  std::size_t item = 0;     // database index, for ScoreDatabase results
};

// How a pair of aligned maps is turned into a score:
//   sum_c w_c * (1/|P|) * sum_{i in P} x'_c[i] * y'_c[i]
// where x', y' are the maps after the normalization scheme. With the
// [mu_c, sigma_c] scheme and uniform weights this is MCNCC.
struct Scorer {
  NormalizationScheme scheme = NormalizationScheme::Mcncc();
  // Dataset statistics for global schemes. When only the query side is set
  // it is used for both maps.
  std::optional<GlobalStats> global_query;
  std::optional<GlobalStats> global_target;
  // Empty means uniform 1/C.
  std::vector<double> weights;
  double epsilon = kDefaultEpsilon;

  const GlobalStats* QueryStats() const;
  const GlobalStats* TargetStats() const;
  std::vector<double> ResolvedWeights(int channels) const;
};

// Sample Pearson coefficient of two equally sized channels over the region.
// A channel whose standard deviation is below epsilon is divided by epsilon,
// which makes a constant channel score 0.
double NccSingle(const ChannelView& x, const ChannelView& y,
                 const SupportRegion& region,
                 double epsilon = kDefaultEpsilon);

// NCC for every channel pair (x_c, y_c).
std::vector<double> ChannelNcc(const FeatureMap& x, const FeatureMap& y,
                               const SupportRegion& region,
                               double epsilon = kDefaultEpsilon);

// Mean of the per-channel NCC values.
double Mcncc(const FeatureMap& x, const FeatureMap& y,
             const SupportRegion& region, double epsilon = kDefaultEpsilon);

// sum_c W_c * NCC_c. The bias is not added.
double McnccWeighted(const FeatureMap& x, const FeatureMap& y,
                     const SupportRegion& region, const ChannelWeights& w,
                     double epsilon = kDefaultEpsilon);

// Full multivariate coefficient (1/C) Tr(Sxx^-1/2 Sxy Syy^-1/2) with
// population covariances over the region. ridge * I is added to Sxx and Syy;
// when unset each matrix gets 1e-6 * trace / C.
double MultivariateTrace(const FeatureMap& x, const FeatureMap& y,
                         const SupportRegion& region,
                         std::optional<double> ridge = std::nullopt);

// Generic scorer over a shared region, computed by normalizing both maps with
// ApplyScheme and taking the weighted per-channel inner products.
double RegionScore(const FeatureMap& x, const FeatureMap& y,
                   const SupportRegion& region, const Scorer& scorer);

struct SearchOptions {
  int workers = 1;
  // Produces the query at a given angle. Defaults to Rotate(query, angle);
  // the CLI supplies a pixel-space rotation followed by featurization.
  std::function<FeatureMap(double)> rotated_query;
};

// Exhaustive scan of the translation grid times the rotation grid. Per axis
// the offsets run -(q-1), -(q-1) + stride, ... up to t-1, so partial overlaps
// are visited; poses whose usable overlap is below min_overlap_fraction of
// the query's valid area are skipped. Ties go to the smallest (dy, dx,
// angle). Throws kEmptySearch if no pose qualifies.
MatchScore SearchAlignments(const FeatureMap& query, const FeatureMap& target,
                            const AlignmentConfig& cfg, const Scorer& scorer,
                            const SearchOptions& options = {});

// Same contract, recomputing every pose from extracted patches with
// ApplyScheme. Slow; kept as the oracle for the accelerated path.
MatchScore SearchAlignmentsReference(const FeatureMap& query,
                                     const FeatureMap& target,
                                     const AlignmentConfig& cfg,
                                     const Scorer& scorer,
                                     const SearchOptions& options = {});

struct DatabaseOptions {
  int workers = 1;
  std::optional<std::size_t> exclude;  // database index left out (self-match)
  std::function<FeatureMap(double)> rotated_query;
};

// One MatchScore per database item in database order (minus the excluded
// one); MatchScore::item records the index. Errors are rethrown with the
// offending item index prefixed.
std::vector<MatchScore> ScoreDatabase(const FeatureMap& query,
                                      std::span<const FeatureMap> database,
                                      const AlignmentConfig& cfg,
                                      const Scorer& scorer,
                                      const DatabaseOptions& options = {});

}  // namespace crossmatch

#endif  // CROSSMATCH_CORRELATE_H_
