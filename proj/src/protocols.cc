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
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>

#include "crossmatch/eval.h"
#include "crossmatch/parallel.h"

namespace crossmatch {

std::vector<std::size_t> ProtocolResult::FirstRelevantRanks() const {
  std::vector<std::size_t> ranks;
  ranks.reserve(queries.size());
  for (const auto& q : queries) ranks.push_back(q.first_relevant_rank);
  return ranks;
}

namespace {

void Finalize(QueryResult& q, std::span<const DatasetItem> database,
              const std::string& group) {
  std::vector<double> scores;
  std::vector<std::uint8_t> relevant;
  std::vector<std::size_t> ids;
  for (const MatchScore& s : q.scores) {
    scores.push_back(s.score);
    relevant.push_back(database[s.item].group == group ? 1 : 0);
    ids.push_back(s.item);
  }
  q.ranked = RankedList::FromScores(scores, relevant, ids);
  q.average_precision = AveragePrecision(q.ranked);
  q.first_relevant_rank = *q.ranked.FirstRelevantRank();
}

std::vector<FeatureMap> Maps(std::span<const DatasetItem> items) {
  std::vector<FeatureMap> maps;
  maps.reserve(items.size());
  for (const auto& it : items) maps.push_back(it.map);
  return maps;
}

double MeanAp(const std::vector<QueryResult>& queries) {
  double sum = 0.0;
  for (const auto& q : queries) sum += q.average_precision;
  return sum / static_cast<double>(queries.size());
}

}  // namespace

ProtocolResult PatchRetrievalProtocol(std::span<const DatasetItem> dataset,
                                      const PatchProtocolConfig& cfg,
                                      const Scorer& scorer) {
  if (cfg.n_queries < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "patch protocol needs at least one query");
  }
  if (cfg.patch_size < 2) {
    throw Error(ErrorCode::kInvalidArgument, "patch size must be >= 2");
  }
  std::map<std::string, std::size_t> group_size;
  for (const auto& it : dataset) ++group_size[it.group];
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& m = dataset[i].map;
    if (group_size[dataset[i].group] >= 2 && m.height() >= cfg.patch_size &&
        m.width() >= cfg.patch_size) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no item belongs to a group with two or more members");
  }

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::vector<std::set<std::pair<int, int>>> used(dataset.size());
  ProtocolResult result;
  result.database_size = dataset.size() - 1;
  result.queries.resize(cfg.n_queries);
  for (int q = 0; q < cfg.n_queries; ++q) {
    const std::size_t src = eligible[static_cast<std::size_t>(q) % eligible.size()];
    const FeatureMap& m = dataset[src].map;
    const int rows = m.height() - cfg.patch_size + 1;
    const int cols = m.width() - cfg.patch_size + 1;
    if (used[src].size() >= static_cast<std::size_t>(rows) * cols) {
      throw Error(ErrorCode::kInvalidArgument,
                  "item " + dataset[src].id + " has no unused patch positions left");
    }
    std::uniform_int_distribution<int> pick_row(0, rows - 1);
    std::uniform_int_distribution<int> pick_col(0, cols - 1);
    std::pair<int, int> pos;
    do {
      pos = {pick_row(rng), pick_col(rng)};
    } while (!used[src].insert(pos).second);
    QueryResult& qr = result.queries[q];
    qr.source = src;
    qr.top = pos.first;
    qr.left = pos.second;
    qr.query_id = dataset[src].id + "@" + std::to_string(pos.first) + "," +
                  std::to_string(pos.second);
  }

  const auto maps = Maps(dataset);
  ParallelFor(result.queries.size(), cfg.workers, [&](std::size_t q) {
    QueryResult& qr = result.queries[q];
    const FeatureMap patch =
        ExtractPatch(maps[qr.source], qr.top, qr.left, cfg.patch_size,
                     cfg.patch_size);
    DatabaseOptions opts;
    opts.exclude = qr.source;
    qr.scores = ScoreDatabase(patch, maps, cfg.alignment, scorer, opts);
    Finalize(qr, dataset, dataset[qr.source].group);
  });
  result.mean_average_precision = MeanAp(result.queries);
  return result;
}

ProtocolResult RetrievalRun(std::span<const DatasetItem> queries,
                            std::span<const DatasetItem> database,
                            const AlignmentConfig& alignment,
                            const Scorer& scorer, int workers,
                            const QueryRotator& rotator) {
  if (queries.empty() || database.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "retrieval needs at least one query and one database item");
  }
  const auto maps = Maps(database);
  ProtocolResult result;
  result.database_size = database.size();
  result.queries.resize(queries.size());
  ParallelFor(queries.size(), workers, [&](std::size_t q) {
    QueryResult& qr = result.queries[q];
    qr.query_id = queries[q].id;
    qr.source = q;
    qr.area_ratio = queries[q].area_ratio;
    DatabaseOptions opts;
    if (rotator) {
      opts.rotated_query = [&rotator, q](double angle) { return rotator(q, angle); };
    }
    qr.scores = ScoreDatabase(queries[q].map, maps, alignment, scorer, opts);
    const bool any = std::any_of(database.begin(), database.end(),
                                 [&](const DatasetItem& d) {
                                   return d.group == queries[q].group;
                                 });
    if (!any) {
      throw Error(ErrorCode::kInvalidArgument,
                  "query " + queries[q].id + " has no match in the database");
    }
    Finalize(qr, database, queries[q].group);
  });
  result.mean_average_precision = MeanAp(result.queries);
  return result;
}

}  // namespace crossmatch
