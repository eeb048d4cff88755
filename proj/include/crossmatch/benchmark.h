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

// Seeded synthetic cross-domain benchmark.
//
// Every source owns a few smooth latent fields. An "impression" renders the
// latents cleanly through one channel mixing, a "scene" renders them through
// another mixing with extra blur, noise and clutter blobs. Each rendering
// also gets per-channel brightness and contrast perturbations and a set of
// nuisance channels that carry no source information. All renderings of a
// source share pixel coordinates.

#ifndef CROSSMATCH_BENCHMARK_H_
#define CROSSMATCH_BENCHMARK_H_

#include <cstdint>
#include <span>
#include <vector>

#include "crossmatch/eval.h"
#include "crossmatch/learn.h"

namespace crossmatch {

struct BenchmarkConfig {
  int sources = 10;
  int impressions_per_source = 3;
  int latent_channels = 4;
  int nuisance_channels = 4;
  int height = 40;
  int width = 40;
  double pattern_sigma = 1.5;       // latent smoothness
  double scene_blur_sigma = 0.8;    // extra blur in the scene domain
  double common_brightness = 4.0;   // std of the offset shared by all channels
  double channel_brightness = 0.5;  // std of the per-channel offset
  double contrast_spread = 0.5;     // std of log per-channel gain
  double impression_noise = 0.3;
  double scene_noise = 0.6;
  double nuisance_gain = 1.0;
  double mixing = 0.6;              // off-diagonal spread of channel mixing
  int clutter_blobs = 4;
  double clutter_amplitude = 2.0;
};

struct SyntheticBenchmark {
  BenchmarkConfig config;
  std::vector<DatasetItem> impressions;  // sources * impressions_per_source
  std::vector<DatasetItem> scenes;       // one full-size scene per source
  int channels() const {
    return config.latent_channels + config.nuisance_channels;
  }
};

SyntheticBenchmark GenerateBenchmark(const BenchmarkConfig& cfg,
                                     std::uint64_t seed);

// Crops of the scenes of the listed sources. Crop sides are drawn so the
// area ratios spread across the occlusion bins (at least min_side pixels).
std::vector<DatasetItem> SceneQueries(const SyntheticBenchmark& bench,
                                      std::span<const int> sources,
                                      int per_source, int min_side,
                                      std::uint64_t seed);

// First impression of each listed source: the cross-domain database.
std::vector<DatasetItem> ImpressionDatabase(const SyntheticBenchmark& bench,
                                            std::span<const int> sources);

// Balanced pairs of aligned scene/impression patches: per source,
// `per_source` positives (same location, same source) and as many negatives
// (scene of this source against the impression of another listed source).
PairBatch BuildTrainingPairs(const SyntheticBenchmark& bench,
                             std::span<const int> sources, int patch_size,
                             int per_source, std::uint64_t seed);

}  // namespace crossmatch

#endif  // CROSSMATCH_BENCHMARK_H_
