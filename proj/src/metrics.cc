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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crossmatch/eval.h"

namespace crossmatch {

RankedList::RankedList(std::vector<RankedItem> items) : items_(std::move(items)) {
  if (items_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ranked list is empty");
  }
  for (std::size_t i = 1; i < items_.size(); ++i) {
    if (items_[i].score > items_[i - 1].score) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ranked list scores increase at position " + std::to_string(i));
    }
  }
}

RankedList RankedList::FromScores(std::span<const double> scores,
                                  std::span<const std::uint8_t> relevant,
                                  std::span<const std::size_t> ids) {
  if (scores.size() != relevant.size() ||
      (!ids.empty() && ids.size() != scores.size())) {
    throw Error(ErrorCode::kDimensionMismatch,
                "scores, relevance flags and ids must have equal length");
  }
  std::vector<RankedItem> items(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    items[i] = {ids.empty() ? i : ids[i], scores[i], relevant[i] != 0};
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const RankedItem& a, const RankedItem& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.id < b.id;
                   });
  return RankedList(std::move(items));
}

std::size_t RankedList::relevant_count() const {
  return static_cast<std::size_t>(
      std::count_if(items_.begin(), items_.end(),
                    [](const RankedItem& it) { return it.relevant; }));
}

std::optional<std::size_t> RankedList::FirstRelevantRank() const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].relevant) return i + 1;
  }
  return std::nullopt;
}

double AveragePrecision(const RankedList& ranked) {
  double sum = 0.0;
  std::size_t hits = 0;
  const auto& items = ranked.items();
  for (std::size_t r = 0; r < items.size(); ++r) {
    if (!items[r].relevant) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "average precision needs at least one relevant item");
  }
  return sum / static_cast<double>(hits);
}

std::vector<PrPoint> PrCurve(const RankedList& ranked) {
  const double total = static_cast<double>(ranked.relevant_count());
  if (total == 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "precision/recall needs at least one relevant item");
  }
  std::vector<PrPoint> out;
  const auto& items = ranked.items();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    hits += items[i].relevant;
    const bool last_of_group =
        i + 1 == items.size() || items[i + 1].score != items[i].score;
    if (last_of_group) {
      out.push_back({static_cast<double>(hits) / total,
                     static_cast<double>(hits) / static_cast<double>(i + 1)});
    }
  }
  return out;
}

CmcCurve Cmc(std::span<const std::size_t> ranks, std::size_t db_size) {
  if (ranks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "CMC needs at least one query");
  }
  std::vector<std::size_t> counts(db_size + 1, 0);
  for (std::size_t r : ranks) {
    if (r < 1 || r > db_size) {
      throw Error(ErrorCode::kBounds,
                  "rank " + std::to_string(r) + " outside [1, " +
                      std::to_string(db_size) + "]");
    }
    ++counts[r];
  }
  CmcCurve curve;
  curve.recall_at_k.resize(db_size);
  std::size_t cumulative = 0;
  for (std::size_t k = 1; k <= db_size; ++k) {
    cumulative += counts[k];
    curve.recall_at_k[k - 1] =
        static_cast<double>(cumulative) / static_cast<double>(ranks.size());
  }
  return curve;
}

std::string_view OcclusionBinName(OcclusionBin bin) {
  switch (bin) {
    case OcclusionBin::kFull: return "full";
    case OcclusionBin::kThreeQuarter: return "three_quarter";
    case OcclusionBin::kHalf: return "half";
    case OcclusionBin::kQuarter: return "quarter";
  }
  return "full";
}

OcclusionBin BinForAreaRatio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "area ratio " + std::to_string(ratio) + " outside [0, 1]");
  }
  if (ratio >= 0.875) return OcclusionBin::kFull;
  if (ratio >= 0.625) return OcclusionBin::kThreeQuarter;
  if (ratio >= 0.375) return OcclusionBin::kHalf;
  return OcclusionBin::kQuarter;
}

OcclusionReport OcclusionBinnedReport(std::span<const QueryOutcome> outcomes,
                                      std::size_t db_size,
                                      std::vector<double> levels_percent) {
  OcclusionReport report;
  report.levels_percent = std::move(levels_percent);
  for (double level : report.levels_percent) {
    const double items = std::ceil(level / 100.0 * static_cast<double>(db_size) - 1e-9);
    report.items_reviewed.push_back(
        std::max<std::size_t>(1, static_cast<std::size_t>(items)));
  }
  const OcclusionBin order[] = {OcclusionBin::kFull, OcclusionBin::kThreeQuarter,
                                OcclusionBin::kHalf, OcclusionBin::kQuarter};
  for (OcclusionBin bin : order) {
    OcclusionRow row;
    row.bin = bin;
    std::vector<std::size_t> hits(report.levels_percent.size(), 0);
    for (const QueryOutcome& q : outcomes) {
      if (BinForAreaRatio(q.area_ratio) != bin) continue;
      ++row.count;
      for (std::size_t l = 0; l < hits.size(); ++l) {
        hits[l] += q.rank <= report.items_reviewed[l];
      }
    }
    if (row.count == 0) continue;
    for (std::size_t h : hits) {
      row.recall_percent.push_back(100.0 * static_cast<double>(h) /
                                   static_cast<double>(row.count));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

ChannelStatsReport ComputeChannelStatsReport(
    std::span<const FeatureMap> patches) {
  if (patches.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "channel statistics report needs at least 2 patches");
  }
  const int channels = patches[0].channels();
  ChannelStatsReport report;
  std::vector<std::vector<double>> means(channels);
  for (const FeatureMap& p : patches) {
    if (p.channels() != channels) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "patches disagree on channel count");
    }
    const ChannelStats s = ComputeChannelStats(p, SupportRegion::Full(p));
    std::vector<std::pair<double, double>> row(channels);
    for (int c = 0; c < channels; ++c) {
      row[c] = {s.means[c], s.stddevs[c]};
      means[c].push_back(s.means[c]);
    }
    report.patch_stats.push_back(std::move(row));
  }
  std::vector<double> spread(channels);
  for (int c = 0; c < channels; ++c) {
    const double n = static_cast<double>(means[c].size());
    // Shifted by the first mean so identical patches give exactly 0.
    const double shift = means[c][0];
    double mu = 0.0;
    for (double m : means[c]) mu += m - shift;
    mu /= n;
    double ss = 0.0;
    for (double m : means[c]) ss += (m - shift - mu) * (m - shift - mu);
    spread[c] = std::sqrt(ss / n);
  }
  report.channel_order.resize(channels);
  std::iota(report.channel_order.begin(), report.channel_order.end(), 0);
  std::stable_sort(report.channel_order.begin(), report.channel_order.end(),
                   [&](int a, int b) { return spread[a] < spread[b]; });
  for (int c : report.channel_order) report.std_of_means.push_back(spread[c]);
  return report;
}

double ExpectedRandomAveragePrecision(std::size_t n, std::size_t relevant) {
  if (relevant == 0 || relevant > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected AP needs 1 <= relevant <= n");
  }
  // E[AP] = (1/R) sum_k E[rel_k * prec@k]; a pair of positions is jointly
  // relevant with probability R(R-1) / (n(n-1)).
  if (n == 1) return 1.0;
  const double nn = static_cast<double>(n);
  const double r = static_cast<double>(relevant);
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    sum += 1.0 / kk + (kk - 1.0) * (r - 1.0) / (kk * (nn - 1.0));
  }
  return sum / nn;
}

}  // namespace crossmatch
