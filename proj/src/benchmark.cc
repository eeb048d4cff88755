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

#include "crossmatch/benchmark.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "crossmatch/featurize.h"

namespace crossmatch {

namespace {

using Rng = std::mt19937_64;

// Zero-mean, unit-std smooth random field.
std::vector<double> SmoothField(Rng& rng, int h, int w, double sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (double& x : v) x = normal(rng);
  v = GaussianBlur(v, h, w, sigma);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  for (double& x : v) x = (x - mean) / sd;
  return v;
}

std::vector<std::vector<double>> MixingMatrix(Rng& rng, int n, double spread) {
  std::normal_distribution<double> normal(0.0, spread);
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) m[r][c] = (r == c ? 1.0 : 0.0) + (r == c ? 0.0 : normal(rng));
  }
  return m;
}

struct DomainStyle {
  std::vector<std::vector<double>> mixing;
  double blur = 0.0;
  double noise = 0.0;
  int clutter_blobs = 0;
};

FeatureMap Render(const BenchmarkConfig& cfg,
                  const std::vector<std::vector<double>>& latents,
                  const DomainStyle& style, Rng& rng, const std::string& tag) {
  const int h = cfg.height;
  const int w = cfg.width;
  const int latent = cfg.latent_channels;
  const int channels = latent + cfg.nuisance_channels;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<std::vector<double>> base(latent);
  for (int l = 0; l < latent; ++l) {
    base[l] = GaussianBlur(latents[l], h, w, style.blur);
  }
  const double common = cfg.common_brightness * normal(rng);
  std::vector<double> values(plane * channels);
  for (int c = 0; c < channels; ++c) {
    const double gain = std::exp(cfg.contrast_spread * normal(rng));
    const double offset = common + cfg.channel_brightness * normal(rng);
    std::vector<double> signal(plane, 0.0);
    if (c < latent) {
      for (int l = 0; l < latent; ++l) {
        const double m = style.mixing[c][l];
        for (std::size_t i = 0; i < plane; ++i) signal[i] += m * base[l][i];
      }
    } else {
      signal = SmoothField(rng, h, w, cfg.pattern_sigma);
      for (double& s : signal) s *= cfg.nuisance_gain;
    }
    for (std::size_t i = 0; i < plane; ++i) {
      values[c * plane + i] =
          gain * signal[i] + offset + style.noise * normal(rng);
    }
  }
  // Clutter: Gaussian blobs added to every channel with random amplitudes.
  for (int b = 0; b < style.clutter_blobs; ++b) {
    const double cy = uniform(rng) * (h - 1);
    const double cx = uniform(rng) * (w - 1);
    const double radius = 2.0 + 3.0 * uniform(rng);
    std::vector<double> amp(channels);
    for (double& a : amp) a = cfg.clutter_amplitude * normal(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double bump = std::exp(-0.5 * d2 / (radius * radius));
        if (bump < 1e-6) continue;
        for (int c = 0; c < channels; ++c) {
          values[c * plane + static_cast<std::size_t>(y) * w + x] += amp[c] * bump;
        }
      }
    }
  }
  return FeatureMap(channels, h, w, std::move(values), tag);
}

}  // namespace

SyntheticBenchmark GenerateBenchmark(const BenchmarkConfig& cfg,
                                     std::uint64_t seed) {
  if (cfg.sources < 2 || cfg.impressions_per_source < 1 ||
      cfg.latent_channels < 1 || cfg.nuisance_channels < 0 ||
      cfg.height < 4 || cfg.width < 4) {
    throw Error(ErrorCode::kConfiguration, "benchmark configuration out of range");
  }
  Rng rng(seed);
  SyntheticBenchmark bench;
  bench.config = cfg;
  DomainStyle impression{MixingMatrix(rng, cfg.latent_channels, cfg.mixing),
                         0.0, cfg.impression_noise, 0};
  DomainStyle scene{MixingMatrix(rng, cfg.latent_channels, cfg.mixing),
                    cfg.scene_blur_sigma, cfg.scene_noise, cfg.clutter_blobs};
  for (int s = 0; s < cfg.sources; ++s) {
    std::vector<std::vector<double>> latents(cfg.latent_channels);
    for (auto& l : latents) l = SmoothField(rng, cfg.height, cfg.width, cfg.pattern_sigma);
    const std::string group = "s" + std::to_string(s);
    for (int k = 0; k < cfg.impressions_per_source; ++k) {
      bench.impressions.push_back(
          {group + "_imp" + std::to_string(k),
           Render(cfg, latents, impression, rng, "impression"), group, 1.0});
    }
    bench.scenes.push_back(
        {group + "_scene", Render(cfg, latents, scene, rng, "scene"), group, 1.0});
  }
  return bench;
}

std::vector<DatasetItem> SceneQueries(const SyntheticBenchmark& bench,
                                      std::span<const int> sources,
                                      int per_source, int min_side,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ratio(0.1, 1.0);
  const int h = bench.config.height;
  const int w = bench.config.width;
  std::vector<DatasetItem> out;
  for (int s : sources) {
    const DatasetItem& scene = bench.scenes.at(static_cast<std::size_t>(s));
    for (int q = 0; q < per_source; ++q) {
      const double r = ratio(rng);
      const int ch = std::clamp(static_cast<int>(std::lround(std::sqrt(r) * h)), min_side, h);
      const int cw = std::clamp(static_cast<int>(std::lround(std::sqrt(r) * w)), min_side, w);
      std::uniform_int_distribution<int> top(0, h - ch);
      std::uniform_int_distribution<int> left(0, w - cw);
      const int t = top(rng);
      const int l = left(rng);
      out.push_back({scene.id + "_q" + std::to_string(q),
                     ExtractPatch(scene.map, t, l, ch, cw), scene.group,
                     static_cast<double>(ch) * cw / (static_cast<double>(h) * w)});
    }
  }
  return out;
}

std::vector<DatasetItem> ImpressionDatabase(const SyntheticBenchmark& bench,
                                            std::span<const int> sources) {
  std::vector<DatasetItem> out;
  const auto per = static_cast<std::size_t>(bench.config.impressions_per_source);
  for (int s : sources) out.push_back(bench.impressions.at(s * per));
  return out;
}

PairBatch BuildTrainingPairs(const SyntheticBenchmark& bench,
                             std::span<const int> sources, int patch_size,
                             int per_source, std::uint64_t seed) {
  if (sources.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "training pairs need at least two sources");
  }
  Rng rng(seed);
  const int h = bench.config.height;
  const int w = bench.config.width;
  std::uniform_int_distribution<int> top(0, h - patch_size);
  std::uniform_int_distribution<int> left(0, w - patch_size);
  std::uniform_int_distribution<std::size_t> other(0, sources.size() - 2);
  const auto per = static_cast<std::size_t>(bench.config.impressions_per_source);
  PairBatch pairs;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const int s = sources[i];
    const FeatureMap& scene = bench.scenes.at(s).map;
    const FeatureMap& own = bench.impressions.at(s * per).map;
    for (int k = 0; k < per_source; ++k) {
      const int t = top(rng);
      const int l = left(rng);
      pairs.push_back({ExtractPatch(scene, t, l, patch_size, patch_size),
                       ExtractPatch(own, t, l, patch_size, patch_size), 1});
      std::size_t j = other(rng);
      if (j >= i) ++j;
      const FeatureMap& foreign = bench.impressions.at(sources[j] * per).map;
      const int t2 = top(rng);
      const int l2 = left(rng);
      pairs.push_back({ExtractPatch(scene, t, l, patch_size, patch_size),
                       ExtractPatch(foreign, t2, l2, patch_size, patch_size), -1});
    }
  }
  return pairs;
}

}  // namespace crossmatch
