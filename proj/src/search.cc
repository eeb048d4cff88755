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

// Alignment search. The accelerated path keeps each map mean-shifted per
// channel and reads first/second moments of unmasked maps from integral
// images, so only the cross term is summed per pose. The reference path
// re-extracts patches and normalizes them from scratch.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include "crossmatch/correlate.h"
#include "crossmatch/parallel.h"

namespace crossmatch {

namespace {

struct PreparedMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> shifted;  // values minus the per-channel shift
  std::vector<double> shift;    // per-channel mean over valid pixels
  std::vector<std::uint8_t> mask;
  std::size_t valid = 0;
  // (height + 1) x (width + 1) prefix sums per channel; unmasked maps only.
  std::vector<double> sum1;
  std::vector<double> sum2;

  double at(int c, int y, int x) const {
    return shifted[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool ok(int y, int x) const {
    return mask.empty() || mask[static_cast<std::size_t>(y) * width + x] != 0;
  }
  double RectSum(const std::vector<double>& s, int c, int y0, int x0, int y1,
                 int x1) const {
    const std::size_t stride = static_cast<std::size_t>(width) + 1;
    const std::size_t base = static_cast<std::size_t>(c) * (height + 1) * stride;
    return s[base + y1 * stride + x1] - s[base + y0 * stride + x1] -
           s[base + y1 * stride + x0] + s[base + y0 * stride + x0];
  }
};

PreparedMap Prepare(const FeatureMap& map) {
  PreparedMap p;
  p.channels = map.channels();
  p.height = map.height();
  p.width = map.width();
  p.mask.assign(map.mask().begin(), map.mask().end());
  p.valid = map.valid_count();
  p.shifted.assign(map.values().begin(), map.values().end());
  p.shift.assign(p.channels, 0.0);
  const std::size_t plane = map.plane_size();
  for (int c = 0; c < p.channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (p.mask.empty() || p.mask[i]) sum += p.shifted[c * plane + i];
    }
    const double mean = p.valid > 0 ? sum / static_cast<double>(p.valid) : 0.0;
    p.shift[c] = mean;
    for (std::size_t i = 0; i < plane; ++i) p.shifted[c * plane + i] -= mean;
  }
  if (p.mask.empty()) {
    const std::size_t stride = static_cast<std::size_t>(p.width) + 1;
    const std::size_t cplane = (static_cast<std::size_t>(p.height) + 1) * stride;
    p.sum1.assign(cplane * p.channels, 0.0);
    p.sum2.assign(cplane * p.channels, 0.0);
    for (int c = 0; c < p.channels; ++c) {
      double* s1 = p.sum1.data() + c * cplane;
      double* s2 = p.sum2.data() + c * cplane;
      for (int y = 0; y < p.height; ++y) {
        double row1 = 0.0;
        double row2 = 0.0;
        for (int x = 0; x < p.width; ++x) {
          const double v = p.at(c, y, x);
          row1 += v;
          row2 += v * v;
          s1[(y + 1) * stride + x + 1] = s1[y * stride + x + 1] + row1;
          s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + row2;
        }
      }
    }
  }
  return p;
}

// Raw moments of the shifted values over one pose's shared pixels.
struct Moments {
  double n = 0.0;
  std::vector<double> sx, sxx, sy, syy, sxy;
  explicit Moments(int channels)
      : sx(channels), sxx(channels), sy(channels), syy(channels),
        sxy(channels) {}
};

struct SideParams {
  std::vector<double> offset;  // centering value in shifted coordinates
  std::vector<double> scale;   // divisor (already floored)
};

SideParams ResolveSide(const NormalizationScheme& scheme,
                       const GlobalStats* global, double n,
                       const std::vector<double>& s1,
                       const std::vector<double>& s2,
                       const std::vector<double>& shift, double epsilon) {
  const int channels = static_cast<int>(s1.size());
  SideParams p;
  p.offset.assign(channels, 0.0);
  p.scale.assign(channels, 1.0);
  double volume_mean = 0.0;  // original coordinates
  double volume_std = 0.0;
  if (scheme.centering == StatSource::kLocalVolume ||
      scheme.scaling == StatSource::kLocalVolume) {
    for (int c = 0; c < channels; ++c) volume_mean += s1[c] + n * shift[c];
    volume_mean /= n * channels;
    double ss = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double d = volume_mean - shift[c];
      ss += s2[c] - 2.0 * d * s1[c] + n * d * d;
    }
    volume_std = std::sqrt(std::max(ss, 0.0) / (n * channels));
  }
  for (int c = 0; c < channels; ++c) {
    switch (scheme.centering) {
      case StatSource::kNone: p.offset[c] = -shift[c]; break;
      case StatSource::kLocalVolume: p.offset[c] = volume_mean - shift[c]; break;
      case StatSource::kLocalChannel: p.offset[c] = s1[c] / n; break;
      case StatSource::kGlobalChannel:
        p.offset[c] = global->means[c] - shift[c];
        break;
    }
    double scale = 1.0;
    switch (scheme.scaling) {
      case StatSource::kNone: break;
      case StatSource::kLocalVolume: scale = volume_std; break;
      case StatSource::kLocalChannel: {
        const double m = s1[c] / n;
        scale = std::sqrt(std::max(s2[c] / n - m * m, 0.0));
        break;
      }
      case StatSource::kGlobalChannel: scale = global->stddevs[c]; break;
    }
    p.scale[c] = scheme.scaling == StatSource::kNone ? 1.0
                                                     : std::max(scale, epsilon);
  }
  return p;
}

struct Candidate {
  double score;
  int dy;
  int dx;
  double angle;
  std::size_t overlap;
};

bool Better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.dy, a.dx, a.angle) < std::tie(b.dy, b.dx, b.angle);
}

struct RotatedQuery {
  double angle;
  FeatureMap map;
  PreparedMap prepared;
};

std::vector<RotatedQuery> BuildRotations(
    const FeatureMap& query, const AlignmentConfig& cfg,
    const std::function<FeatureMap(double)>& provider, bool prepare) {
  std::vector<RotatedQuery> out;
  for (double angle : cfg.Angles()) {
    RotatedQuery r{angle,
                   provider ? provider(angle)
                            : (angle == 0.0 ? query : Rotate(query, angle)),
                   {}};
    if (prepare) r.prepared = Prepare(r.map);
    out.push_back(std::move(r));
  }
  return out;
}

void CheckCompatible(const FeatureMap& q, const FeatureMap& t,
                     const Scorer& scorer) {
  if (q.channels() != t.channels()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has " + std::to_string(q.channels()) +
                    " channels, target has " + std::to_string(t.channels()));
  }
  (void)scorer.ResolvedWeights(q.channels());
  if (scorer.scheme.UsesGlobal()) {
    for (const GlobalStats* g : {scorer.QueryStats(), scorer.TargetStats()}) {
      if (g == nullptr) {
        throw Error(ErrorCode::kConfiguration,
                    "scheme " + SchemeName(scorer.scheme) +
                        " needs dataset-level statistics");
      }
      if (g->means.size() != static_cast<std::size_t>(q.channels()) ||
          g->stddevs.size() != static_cast<std::size_t>(q.channels())) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "global statistics do not match the channel count");
      }
    }
  }
}

std::size_t RequiredOverlap(const AlignmentConfig& cfg, std::size_t area) {
  const auto need = static_cast<std::size_t>(
      std::ceil(cfg.min_overlap_fraction * static_cast<double>(area) - 1e-9));
  return std::max<std::size_t>(need, 2);
}

// Offsets swept from the first overlapping position, -(query_extent - 1),
// in steps of the stride up to the last overlapping one.
std::vector<int> GridOffsets(int query_extent, int target_extent, int stride) {
  std::vector<int> out;
  for (int d = -(query_extent - 1); d <= target_extent - 1; d += stride) {
    out.push_back(d);
  }
  return out;
}

// Best pose for one (angle, dy) row on the accelerated path.
std::optional<Candidate> ScanRow(const RotatedQuery& rq, const PreparedMap& t,
                                 int dy, const std::vector<int>& dxs,
                                 const AlignmentConfig& cfg,
                                 const Scorer& scorer,
                                 const std::vector<double>& weights) {
  const PreparedMap& q = rq.prepared;
  const int channels = q.channels;
  const std::size_t required = RequiredOverlap(cfg, q.valid);
  const bool masked = !q.mask.empty() || !t.mask.empty();
  const GlobalStats* gq = scorer.QueryStats();
  const GlobalStats* gt = scorer.TargetStats();

  const int i0 = std::max(0, -dy);
  const int i1 = std::min(q.height, t.height - dy);
  std::optional<Candidate> best;
  Moments m(channels);
  for (int dx : dxs) {
    const int j0 = std::max(0, -dx);
    const int j1 = std::min(q.width, t.width - dx);
    if (i1 <= i0 || j1 <= j0) continue;

    std::size_t n = 0;
    if (!masked) {
      n = static_cast<std::size_t>(i1 - i0) * (j1 - j0);
    } else {
      for (int i = i0; i < i1; ++i) {
        for (int j = j0; j < j1; ++j) n += q.ok(i, j) && t.ok(i + dy, j + dx);
      }
    }
    if (n < required) continue;
    m.n = static_cast<double>(n);

    for (int c = 0; c < channels; ++c) {
      double sxy = 0.0;
      if (!masked) {
        for (int i = i0; i < i1; ++i) {
          const double* qr = &q.shifted[(static_cast<std::size_t>(c) * q.height + i) * q.width];
          const double* tr = &t.shifted[(static_cast<std::size_t>(c) * t.height + i + dy) * t.width + dx];
          for (int j = j0; j < j1; ++j) sxy += qr[j] * tr[j];
        }
        m.sx[c] = q.RectSum(q.sum1, c, i0, j0, i1, j1);
        m.sxx[c] = q.RectSum(q.sum2, c, i0, j0, i1, j1);
        m.sy[c] = t.RectSum(t.sum1, c, i0 + dy, j0 + dx, i1 + dy, j1 + dx);
        m.syy[c] = t.RectSum(t.sum2, c, i0 + dy, j0 + dx, i1 + dy, j1 + dx);
      } else {
        double sx = 0.0, sxx = 0.0, sy = 0.0, syy = 0.0;
        for (int i = i0; i < i1; ++i) {
          for (int j = j0; j < j1; ++j) {
            if (!q.ok(i, j) || !t.ok(i + dy, j + dx)) continue;
            const double a = q.at(c, i, j);
            const double b = t.at(c, i + dy, j + dx);
            sx += a;
            sxx += a * a;
            sy += b;
            syy += b * b;
            sxy += a * b;
          }
        }
        m.sx[c] = sx;
        m.sxx[c] = sxx;
        m.sy[c] = sy;
        m.syy[c] = syy;
      }
      m.sxy[c] = sxy;
    }

    const SideParams px = ResolveSide(scorer.scheme, gq, m.n, m.sx, m.sxx,
                                      q.shift, scorer.epsilon);
    const SideParams py = ResolveSide(scorer.scheme, gt, m.n, m.sy, m.syy,
                                      t.shift, scorer.epsilon);
    double score = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double a = px.offset[c];
      const double b = py.offset[c];
      const double cross =
          m.sxy[c] - b * m.sx[c] - a * m.sy[c] + m.n * a * b;
      score += weights[c] * cross / (m.n * px.scale[c] * py.scale[c]);
    }
    const Candidate cand{score, dy, dx, rq.angle, n};
    if (!best || Better(cand, *best)) best = cand;
  }
  return best;
}

MatchScore Finish(const std::vector<std::optional<Candidate>>& found) {
  std::optional<Candidate> best;
  for (const auto& c : found) {
    if (c && (!best || Better(*c, *best))) best = c;
  }
  if (!best) {
    throw Error(ErrorCode::kEmptySearch,
                "no pose reaches the minimum overlap; the search space is empty");
  }
  MatchScore out;
  out.score = best->score;
  out.dy = best->dy;
  out.dx = best->dx;
  out.angle = best->angle;
  out.overlap = best->overlap;
  return out;
}

MatchScore SearchPrepared(const std::vector<RotatedQuery>& rotations,
                          const PreparedMap& target, const AlignmentConfig& cfg,
                          const Scorer& scorer, int workers) {
  const auto weights = scorer.ResolvedWeights(target.channels);
  struct Task {
    std::size_t rotation;
    int dy;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<int>> dxs(rotations.size());
  for (std::size_t r = 0; r < rotations.size(); ++r) {
    const auto& q = rotations[r].prepared;
    for (int dy : GridOffsets(q.height, target.height, cfg.translation_stride)) {
      tasks.push_back({r, dy});
    }
    dxs[r] = GridOffsets(q.width, target.width, cfg.translation_stride);
  }
  std::vector<std::optional<Candidate>> found(tasks.size());
  ParallelFor(tasks.size(), workers, [&](std::size_t k) {
    const Task& t = tasks[k];
    found[k] = ScanRow(rotations[t.rotation], target, t.dy, dxs[t.rotation],
                       cfg, scorer, weights);
  });
  return Finish(found);
}

}  // namespace

MatchScore SearchAlignments(const FeatureMap& query, const FeatureMap& target,
                            const AlignmentConfig& cfg, const Scorer& scorer,
                            const SearchOptions& options) {
  cfg.Validate();
  CheckCompatible(query, target, scorer);
  const auto rotations =
      BuildRotations(query, cfg, options.rotated_query, /*prepare=*/true);
  for (const auto& r : rotations) CheckCompatible(r.map, target, scorer);
  const PreparedMap prepared_target = Prepare(target);
  return SearchPrepared(rotations, prepared_target, cfg, scorer,
                        options.workers);
}

MatchScore SearchAlignmentsReference(const FeatureMap& query,
                                     const FeatureMap& target,
                                     const AlignmentConfig& cfg,
                                     const Scorer& scorer,
                                     const SearchOptions& options) {
  cfg.Validate();
  CheckCompatible(query, target, scorer);
  const auto rotations =
      BuildRotations(query, cfg, options.rotated_query, /*prepare=*/false);
  std::vector<std::optional<Candidate>> found;
  for (const auto& rq : rotations) {
    const FeatureMap& q = rq.map;
    CheckCompatible(q, target, scorer);
    const std::size_t required = RequiredOverlap(cfg, q.valid_count());
    for (int dy : GridOffsets(q.height(), target.height(), cfg.translation_stride)) {
      for (int dx : GridOffsets(q.width(), target.width(), cfg.translation_stride)) {
        const int i0 = std::max(0, -dy);
        const int i1 = std::min(q.height(), target.height() - dy);
        const int j0 = std::max(0, -dx);
        const int j1 = std::min(q.width(), target.width() - dx);
        if (i1 <= i0 || j1 <= j0) continue;
        const FeatureMap qp = ExtractPatch(q, i0, j0, i1 - i0, j1 - j0);
        const FeatureMap tp =
            ExtractPatch(target, i0 + dy, j0 + dx, i1 - i0, j1 - j0);
        std::size_t n = 0;
        for (int i = 0; i < qp.height(); ++i) {
          for (int j = 0; j < qp.width(); ++j) n += qp.valid(i, j) && tp.valid(i, j);
        }
        if (n < required) continue;
        const double score =
            RegionScore(qp, tp, SupportRegion::Full(qp.WithoutMask()), scorer);
        found.push_back(Candidate{score, dy, dx, rq.angle, n});
      }
    }
  }
  return Finish(found);
}

std::vector<MatchScore> ScoreDatabase(const FeatureMap& query,
                                      std::span<const FeatureMap> database,
                                      const AlignmentConfig& cfg,
                                      const Scorer& scorer,
                                      const DatabaseOptions& options) {
  cfg.Validate();
  const auto rotations =
      BuildRotations(query, cfg, options.rotated_query, /*prepare=*/true);

  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < database.size(); ++i) {
    if (!options.exclude || *options.exclude != i) items.push_back(i);
  }
  std::vector<MatchScore> out(items.size());
  ParallelFor(items.size(), options.workers, [&](std::size_t k) {
    const std::size_t item = items[k];
    try {
      const FeatureMap& target = database[item];
      for (const auto& r : rotations) CheckCompatible(r.map, target, scorer);
      out[k] = SearchPrepared(rotations, Prepare(target), cfg, scorer, 1);
      out[k].item = item;
    } catch (const Error& e) {
      throw Error(e.code(),
                  "database item " + std::to_string(item) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace crossmatch
