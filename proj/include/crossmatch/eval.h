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

// Retrieval metrics and the evaluation protocols built on them.

#ifndef CROSSMATCH_EVAL_H_
#define CROSSMATCH_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crossmatch/correlate.h"
#include "crossmatch/tensor.h"

namespace crossmatch {

struct RankedItem {
  std::size_t id = 0;
  double score = 0.0;
  bool relevant = false;
};

// Items in descending score order; equal scores keep ascending id order.
class RankedList {
 public:
  RankedList() = default;
  // Throws kInvalidArgument when empty or when scores increase.
  explicit RankedList(std::vector<RankedItem> items);

  // Sorts by score (descending), ties by id.
  static RankedList FromScores(std::span<const double> scores,
                               std::span<const std::uint8_t> relevant,
                               std::span<const std::size_t> ids = {});

  const std::vector<RankedItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t relevant_count() const;
  // 1-based rank of the first relevant item, or nullopt.
  std::optional<std::size_t> FirstRelevantRank() const;

 private:
  std::vector<RankedItem> items_;
};

// Mean over relevant items of (relevant seen so far) / rank.
// Throws kInvalidArgument when nothing is relevant.
double AveragePrecision(const RankedList& ranked);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// One point per distinct score, thresholding at that score.
std::vector<PrPoint> PrCurve(const RankedList& ranked);

struct CmcCurve {
  std::vector<double> recall_at_k;  // index k-1 holds recall after k items
};

// ranks are 1-based ranks of each query's true match.
CmcCurve Cmc(std::span<const std::size_t> ranks, std::size_t db_size);

enum class OcclusionBin { kFull, kThreeQuarter, kHalf, kQuarter };

std::string_view OcclusionBinName(OcclusionBin bin);
// [0.875, 1], [0.625, 0.875), [0.375, 0.625), [0, 0.375).
OcclusionBin BinForAreaRatio(double ratio);

struct QueryOutcome {
  std::size_t rank = 1;  // of the true match, 1-based
  double area_ratio = 1.0;
};

struct OcclusionRow {
  OcclusionBin bin = OcclusionBin::kFull;
  std::size_t count = 0;
  std::vector<double> recall_percent;  // one entry per requested level
};

struct OcclusionReport {
  std::vector<double> levels_percent;  // e.g. {1, 10}
  std::vector<std::size_t> items_reviewed;  // ceil(level% * db_size)
  std::vector<OcclusionRow> rows;  // populated bins only, full -> quarter
};

OcclusionReport OcclusionBinnedReport(std::span<const QueryOutcome> outcomes,
                                      std::size_t db_size,
                                      std::vector<double> levels_percent = {
                                          1.0, 10.0});

struct ChannelStatsReport {
  // Channels sorted by increasing std of their per-patch means.
  std::vector<int> channel_order;
  std::vector<double> std_of_means;
  // patch_stats[p][c] = (mean, stddev) of channel c in patch p.
  std::vector<std::vector<std::pair<double, double>>> patch_stats;
};

ChannelStatsReport ComputeChannelStatsReport(std::span<const FeatureMap> patches);

// Expected AP of a uniformly random ranking of n items, r of them relevant.
double ExpectedRandomAveragePrecision(std::size_t n, std::size_t relevant);

// ---------------------------------------------------------------------------
// Protocols

struct DatasetItem {
  std::string id;
  FeatureMap map;
  std::string group;          // same-source equivalence class
  double area_ratio = 1.0;    // query crop area / ground-truth area
};

struct QueryResult {
  std::string query_id;
  std::size_t source = 0;  // index of the item the query came from
  int top = 0;             // patch origin, patch protocol only
  int left = 0;
  std::vector<MatchScore> scores;  // database order (self-match removed)
  RankedList ranked;
  double average_precision = 0.0;
  std::size_t first_relevant_rank = 0;
  double area_ratio = 1.0;
};

struct ProtocolResult {
  double mean_average_precision = 0.0;
  std::size_t database_size = 0;
  std::vector<QueryResult> queries;

  std::vector<std::size_t> FirstRelevantRanks() const;
};

struct PatchProtocolConfig {
  int patch_size = 97;
  int n_queries = 512;
  std::uint64_t seed = 0;
  AlignmentConfig alignment{1, 0.0, 0.0, 4.0, 1.0};
  int workers = 1;
};

// Seeded query patches cut from items whose group has >= 2 members; each is
// searched over translations against every other item. Patch positions are
// drawn without replacement per item.
ProtocolResult PatchRetrievalProtocol(std::span<const DatasetItem> dataset,
                                      const PatchProtocolConfig& cfg,
                                      const Scorer& scorer);

// Produces query q at a given angle; used instead of Rotate when set.
using QueryRotator = std::function<FeatureMap(std::size_t query, double angle)>;

// Every query against every database item. Relevant items share the group.
ProtocolResult RetrievalRun(std::span<const DatasetItem> queries,
                            std::span<const DatasetItem> database,
                            const AlignmentConfig& alignment,
                            const Scorer& scorer, int workers = 1,
                            const QueryRotator& rotator = {});

}  // namespace crossmatch

#endif  // CROSSMATCH_EVAL_H_
