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

#include "commands.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crossmatch/benchmark.h"
#include "crossmatch/correlate.h"
#include "crossmatch/eval.h"
#include "crossmatch/featurize.h"
#include "crossmatch/io.h"
#include "crossmatch/learn.h"
#include "crossmatch/manifest.h"
#include "crossmatch/normalize.h"
#include "crossmatch/whiten.h"
#include "json.hpp"

namespace crossmatch::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Writes to the file, or to stdout when the path is empty.
void Emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    WriteFileBytes(path, text);
  }
}

struct CommonFlags {
  int workers = 1;
  double epsilon = kDefaultEpsilon;
  std::uint64_t seed = 0;
  std::string precision = "float64";
  bool allow_narrowing = false;
  std::string featurizer = "gray";
  int orientations = 4;
  double blur = 1.0;

  InputOptions Inputs() const {
    InputOptions o;
    o.read.pipeline = ParseDType(precision);
    o.read.allow_narrowing = allow_narrowing;
    o.featurizer.mode = ParseFeaturizerMode(featurizer);
    o.featurizer.orientations = orientations;
    o.featurizer.blur_sigma = blur;
    if (orientations < 1) {
      throw Error(ErrorCode::kConfiguration, "--orientations must be >= 1");
    }
    return o;
  }
};

void AddCommon(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--epsilon", f.epsilon, "Standard deviation floor");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--precision", f.precision, "Pipeline precision")
      ->check(CLI::IsMember({"float32", "float64"}));
  sub->add_flag("--allow-narrowing", f.allow_narrowing,
                "Round float64 tensors into a float32 pipeline");
  sub->add_option("--featurizer", f.featurizer, "Pixel featurizer for image inputs")
      ->check(CLI::IsMember({"gray", "gradient-bank"}));
  sub->add_option("--orientations", f.orientations, "Gradient-bank orientations");
  sub->add_option("--blur", f.blur, "Gradient-bank blur sigma");
}

struct AlignFlags {
  std::optional<int> stride;
  std::optional<double> rot_min;
  std::optional<double> rot_max;
  std::optional<double> rot_stride;
  std::optional<double> min_overlap;

  AlignmentConfig Resolve(AlignmentConfig cfg) const {
    if (stride) cfg.translation_stride = *stride;
    if (rot_min) cfg.rotation_min = *rot_min;
    if (rot_max) cfg.rotation_max = *rot_max;
    if (rot_stride) cfg.rotation_stride = *rot_stride;
    if (min_overlap) cfg.min_overlap_fraction = *min_overlap;
    cfg.Validate();
    return cfg;
  }
};

void AddAlign(CLI::App* sub, AlignFlags& f) {
  sub->add_option("--stride", f.stride, "Translation stride in pixels");
  sub->add_option("--rot-min", f.rot_min, "Smallest rotation in degrees");
  sub->add_option("--rot-max", f.rot_max, "Largest rotation in degrees");
  sub->add_option("--rot-stride", f.rot_stride, "Rotation step in degrees");
  sub->add_option("--min-overlap", f.min_overlap,
                  "Minimum overlap as a fraction of the query's valid area");
}

json AlignJson(const AlignmentConfig& a) {
  return {{"stride", a.translation_stride},
          {"rot_min", a.rotation_min},
          {"rot_max", a.rotation_max},
          {"rot_stride", a.rotation_stride},
          {"min_overlap", a.min_overlap_fraction}};
}

bool Rotates(const AlignmentConfig& a) {
  const auto angles = a.Angles();
  return angles.size() != 1 || angles.front() != 0.0;
}

struct ModelFlags {
  std::string scheme = "mcncc";
  std::string weights;
  std::string proj_x;
  std::string proj_y;
  std::string model;
  std::string global_stats;
  std::string global_stats_target;
};

void AddModel(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--scheme", f.scheme, "Normalization scheme");
  sub->add_option("--weights", f.weights,
                  "Channel weights: a tensor file or comma-separated values");
  sub->add_option("--proj-x", f.proj_x, "Query-domain projection bundle")
      ->check(CLI::ExistingFile);
  sub->add_option("--proj-y", f.proj_y, "Database-domain projection bundle")
      ->check(CLI::ExistingFile);
  sub->add_option("--model", f.model, "Trained model checkpoint")
      ->check(CLI::ExistingFile);
  sub->add_option("--global-stats", f.global_stats,
                  "Dataset statistics for global schemes (query side)")
      ->check(CLI::ExistingFile);
  sub->add_option("--global-stats-target", f.global_stats_target,
                  "Dataset statistics for the database side")
      ->check(CLI::ExistingFile);
}

std::vector<double> ParseWeights(const std::string& text) {
  if (fs::exists(text)) {
    const Tensor t = ReadTensorFile(text);
    if (t.dims.size() != 1) {
      throw Error(ErrorCode::kFormat, "weights tensor must have rank 1");
    }
    return t.values;
  }
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfiguration, "bad --weights entry '" + tok + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfiguration, "--weights is empty");
  return out;
}

struct Scoring {
  Scorer scorer;
  std::optional<Projection> proj_x;
  std::optional<Projection> proj_y;
};

Scoring BuildScoring(const ModelFlags& f, double epsilon) {
  Scoring s;
  s.scorer.scheme = ParseScheme(f.scheme);
  s.scorer.epsilon = epsilon;
  if (!f.model.empty()) {
    const SiameseModel m = ReadModel(f.model);
    s.proj_x = m.proj_x;
    s.proj_y = m.proj_y;
    s.scorer.weights = m.weights.weights;
  }
  if (!f.proj_x.empty()) s.proj_x = ReadProjection(f.proj_x);
  if (!f.proj_y.empty()) s.proj_y = ReadProjection(f.proj_y);
  if (!f.weights.empty()) s.scorer.weights = ParseWeights(f.weights);
  if (!f.global_stats.empty()) s.scorer.global_query = ReadGlobalStats(f.global_stats);
  if (!f.global_stats_target.empty()) {
    s.scorer.global_target = ReadGlobalStats(f.global_stats_target);
  }
  return s;
}

FeatureMap Project(const FeatureMap& map, const std::optional<Projection>& p) {
  return p ? ApplyProjection(map, *p) : map;
}

// Fills in missing dataset statistics for global schemes from the loaded
// items themselves.
void FitMissingGlobals(Scorer& scorer, std::span<const DatasetItem> queries,
                       std::span<const DatasetItem> database) {
  if (!scorer.scheme.UsesGlobal()) return;
  auto fit = [](std::span<const DatasetItem> items) {
    GlobalStatsAccumulator acc;
    for (const auto& it : items) acc.Add(it.map);
    return acc.Finish();
  };
  if (!scorer.global_query) scorer.global_query = fit(queries);
  if (!scorer.global_target) scorer.global_target = fit(database);
}

std::vector<DatasetItem> Projected(std::vector<DatasetItem> items,
                                   const std::optional<Projection>& p) {
  for (auto& it : items) it.map = Project(it.map, p);
  return items;
}

std::string RotationMode(const AlignmentConfig& a, bool images) {
  if (!Rotates(a)) return "none";
  return images ? "pixel" : "feature";
}

// ---------------------------------------------------------------------------

void AddFeaturize(CLI::App& app) {
  struct Opts {
    std::string input, output;
    CommonFlags common;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("featurize", "Featurize a grayscale image into a tensor file");
  sub->add_option("input", o->input, "PGM or PNG image")->required()->check(CLI::ExistingFile);
  sub->add_option("output", o->output, "Tensor file to write")->required();
  AddCommon(sub, o->common);
  sub->callback([o] {
    const InputOptions in = o->common.Inputs();
    const FeatureMap map = FeaturizePixels(ReadGrayImage(o->input), in.featurizer);
    WriteFeatureMap(o->output, map, in.read.pipeline);
  });
}

std::optional<ManifestRole> RoleFilter(const std::string& role) {
  if (role == "query") return ManifestRole::kQuery;
  if (role == "database") return ManifestRole::kDatabase;
  return std::nullopt;
}

std::vector<DatasetItem> LoadRole(const Manifest& m, const std::string& role,
                                  const InputOptions& in) {
  if (const auto r = RoleFilter(role)) return LoadItems(m, *r, in);
  auto items = LoadItems(m, ManifestRole::kQuery, in);
  auto db = LoadItems(m, ManifestRole::kDatabase, in);
  items.insert(items.end(), db.begin(), db.end());
  return items;
}

void AddStats(CLI::App& app) {
  struct Opts {
    std::string manifest, out, report, role = "all";
    CommonFlags common;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("stats", "Fit dataset channel statistics and report per-patch spread");
  sub->add_option("manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Global statistics bundle to write")->required();
  sub->add_option("--report", o->report,
                  "Two-column channel report: channel, std of per-item means (ascending)");
  sub->add_option("--role", o->role, "Entries to pool")
      ->check(CLI::IsMember({"all", "query", "database"}));
  AddCommon(sub, o->common);
  sub->callback([o] {
    const Manifest m = ReadManifest(o->manifest);
    ValidateManifest(m, /*closed_set=*/false);
    const auto items = LoadRole(m, o->role, o->common.Inputs());
    std::vector<FeatureMap> maps;
    for (const auto& it : items) maps.push_back(it.map);
    WriteGlobalStats(o->out, FitGlobalStats(maps));
    if (!o->report.empty()) {
      const ChannelStatsReport r = ComputeChannelStatsReport(maps);
      std::string text;
      for (std::size_t i = 0; i < r.channel_order.size(); ++i) {
        text += std::to_string(r.channel_order[i]) + " " + Num(r.std_of_means[i]) + "\n";
      }
      WriteFileBytes(o->report, text);
    }
  });
}

void AddFitPca(CLI::App& app) {
  struct Opts {
    std::string manifest, out, role = "database";
    int k = 0;
    std::size_t max_samples = 200000;
    double ridge_scale = kDefaultRidgeScale;
    CommonFlags common;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("fit-pca", "Fit a PCA whitening projection for one domain");
  sub->add_option("manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Projection bundle to write")->required();
  sub->add_option("--role", o->role, "Entries to fit on")
      ->check(CLI::IsMember({"all", "query", "database"}));
  sub->add_option("--k", o->k, "Output channels (0 keeps all)");
  sub->add_option("--max-samples", o->max_samples, "Pixel sample cap (0 for all)");
  sub->add_option("--ridge-scale", o->ridge_scale, "Ridge relative to the mean variance");
  AddCommon(sub, o->common);
  sub->callback([o] {
    const Manifest m = ReadManifest(o->manifest);
    ValidateManifest(m, /*closed_set=*/false);
    const auto items = LoadRole(m, o->role, o->common.Inputs());
    if (items.empty()) throw Error(ErrorCode::kInvalidArgument, "no entries to fit on");
    std::vector<FeatureMap> maps;
    for (const auto& it : items) maps.push_back(it.map);
    const Eigen::MatrixXd samples = PixelSamples(maps, o->max_samples, o->common.seed);
    const int k = o->k > 0 ? o->k : maps.front().channels();
    WriteProjection(o->out, FitPca(samples, k, RelativeRidge(samples, o->ridge_scale),
                                   maps.front().domain_tag()));
  });
}

// Same-group (query, database) pairs plus seeded different-group negatives,
// cropped to their best MCNCC alignment.
PairBatch ManifestPairs(const std::vector<DatasetItem>& queries,
                        const std::vector<DatasetItem>& database,
                        int negatives_per_query, const AlignmentConfig& align,
                        std::uint64_t seed, double epsilon) {
  std::mt19937_64 rng(seed);
  PairBatch pairs;
  for (const auto& q : queries) {
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < database.size(); ++i) {
      if (database[i].group == q.group) {
        pairs.push_back(AlignPair(q.map, database[i].map, 1, align, epsilon));
      } else {
        others.push_back(i);
      }
    }
    std::shuffle(others.begin(), others.end(), rng);
    const std::size_t n = std::min<std::size_t>(others.size(), negatives_per_query);
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back(AlignPair(q.map, database[others[i]].map, -1, align, epsilon));
    }
  }
  return pairs;
}

void AddFitCca(CLI::App& app) {
  struct Opts {
    std::string manifest, out_x, out_y, correlations;
    int k = 0;
    double ridge_scale = kDefaultRidgeScale;
    CommonFlags common;
    AlignFlags align;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("fit-cca", "Fit paired CCA projections from same-group query/database pairs");
  sub->add_option("manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out-x", o->out_x, "Query-domain projection bundle")->required();
  sub->add_option("--out-y", o->out_y, "Database-domain projection bundle")->required();
  sub->add_option("--correlations", o->correlations,
                  "Two-column canonical correlations (stdout when omitted)");
  sub->add_option("--k", o->k, "Output channels (0 keeps all)");
  sub->add_option("--ridge-scale", o->ridge_scale, "Ridge relative to the mean variance");
  AddCommon(sub, o->common);
  AddAlign(sub, o->align);
  sub->callback([o] {
    const Manifest m = ReadManifest(o->manifest);
    ValidateManifest(m);
    const InputOptions in = o->common.Inputs();
    const auto queries = LoadItems(m, ManifestRole::kQuery, in);
    const auto database = LoadItems(m, ManifestRole::kDatabase, in);
    const AlignmentConfig align = o->align.Resolve({2, 0.0, 0.0, 4.0, 0.5});
    const PairBatch pairs =
        ManifestPairs(queries, database, 0, align, o->common.seed, o->common.epsilon);
    std::vector<FeatureMap> xs, ys;
    for (const auto& p : pairs) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    Eigen::MatrixXd sx, sy;
    PairedPixelSamples(xs, ys, &sx, &sy);
    const int k = o->k > 0 ? o->k : static_cast<int>(std::min(sx.cols(), sy.cols()));
    const double ridge = std::max(RelativeRidge(sx, o->ridge_scale),
                                  RelativeRidge(sy, o->ridge_scale));
    const CcaResult cca = FitCca(sx, sy, k, ridge, xs.front().domain_tag(),
                                 ys.front().domain_tag());
    WriteProjection(o->out_x, cca.x);
    WriteProjection(o->out_y, cca.y);
    std::string text;
    for (Eigen::Index i = 0; i < cca.correlations.size(); ++i) {
      text += std::to_string(i) + " " + Num(cca.correlations[i]) + "\n";
    }
    Emit(o->correlations, text);
  });
}

void AddTrain(CLI::App& app) {
  struct Opts {
    std::string manifest, out, log, init, regime = "weights";
    int epochs = 20;
    int batch_size = 16;
    double lr = 1e-3;
    double alpha = 100.0;
    double beta = 1.0;
    int negatives = 1;
    double val_fraction = 0.2;
    int k = 0;
    double ridge_scale = kDefaultRidgeScale;
    CommonFlags common;
    AlignFlags align;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train", "Train channel weights (and optionally projections) on manifest pairs");
  sub->add_option("manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Model checkpoint to write")->required();
  sub->add_option("--log", o->log, "Per-epoch validation loss, two columns");
  sub->add_option("--init", o->init, "Starting checkpoint")->check(CLI::ExistingFile);
  sub->add_option("--regime", o->regime, "weights, cca-weights or joint")
      ->check(CLI::IsMember({"weights", "cca-weights", "joint"}));
  sub->add_option("--epochs", o->epochs, "Training epochs");
  sub->add_option("--batch-size", o->batch_size, "Pairs per step");
  sub->add_option("--lr", o->lr, "Learning rate");
  sub->add_option("--alpha", o->alpha, "L2 weight on W");
  sub->add_option("--beta", o->beta, "L2 weight on U and V");
  sub->add_option("--negatives", o->negatives, "Different-group pairs per query");
  sub->add_option("--val-fraction", o->val_fraction, "Share of pairs held out for model selection")
      ->check(CLI::Range(0.0, 0.9));
  sub->add_option("--k", o->k, "CCA output channels (0 keeps all)");
  sub->add_option("--ridge-scale", o->ridge_scale, "CCA ridge relative to the mean variance");
  AddCommon(sub, o->common);
  AddAlign(sub, o->align);
  sub->callback([o] {
    const Manifest m = ReadManifest(o->manifest);
    ValidateManifest(m);
    const InputOptions in = o->common.Inputs();
    const auto queries = LoadItems(m, ManifestRole::kQuery, in);
    const auto database = LoadItems(m, ManifestRole::kDatabase, in);
    if (queries.empty() || database.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "training needs query and database entries");
    }
    const AlignmentConfig align = o->align.Resolve({2, 0.0, 0.0, 4.0, 0.5});
    PairBatch pairs = ManifestPairs(queries, database, o->negatives, align,
                                    o->common.seed, o->common.epsilon);

    std::mt19937_64 rng(o->common.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::floor(o->val_fraction * static_cast<double>(pairs.size())));
    PairBatch val(pairs.end() - static_cast<std::ptrdiff_t>(n_val), pairs.end());
    pairs.resize(pairs.size() - n_val);

    const TrainRegime regime = ParseRegime(o->regime);
    SiameseModel model = o->init.empty()
                             ? SiameseModel::Untrained(queries.front().map.channels())
                             : ReadModel(o->init);
    if (regime != TrainRegime::kWeightsOnly && o->init.empty()) {
      std::vector<FeatureMap> xs, ys;
      for (const auto& p : pairs) {
        if (p.z == 1) {
          xs.push_back(p.x);
          ys.push_back(p.y);
        }
      }
      Eigen::MatrixXd sx, sy;
      PairedPixelSamples(xs, ys, &sx, &sy);
      const int k = o->k > 0 ? o->k : static_cast<int>(std::min(sx.cols(), sy.cols()));
      const CcaResult cca = FitCca(sx, sy, k,
                                   std::max(RelativeRidge(sx, o->ridge_scale),
                                            RelativeRidge(sy, o->ridge_scale)));
      model.proj_x = cca.x;
      model.proj_y = cca.y;
      model.weights = ChannelWeights::Uniform(k);
    }
    model.alpha = o->alpha;
    model.beta = o->beta;

    TrainConfig cfg = TrainConfig::ForRegime(regime);
    cfg.learning_rate = o->lr;
    cfg.epochs = o->epochs;
    cfg.batch_size = o->batch_size;
    cfg.seed = o->common.seed;
    cfg.workers = o->common.workers;
    cfg.epsilon = o->common.epsilon;
    const TrainResult r = Train(model, pairs, val.empty() ? nullptr : &val, cfg);
    WriteModel(o->out, r.model, {o->common.seed, o->regime});
    if (!o->log.empty()) {
      std::string text;
      for (std::size_t e = 0; e < r.validation_history.size(); ++e) {
        text += std::to_string(e + 1) + " " + Num(r.validation_history[e]) + "\n";
      }
      WriteFileBytes(o->log, text);
    }
  });
}

void AddMatch(CLI::App& app) {
  struct Opts {
    std::string query, target;
    CommonFlags common;
    AlignFlags align;
    ModelFlags model;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("match", "Best alignment score of one query against one target");
  sub->add_option("query", o->query, "Query tensor or image")->required()->check(CLI::ExistingFile);
  sub->add_option("target", o->target, "Target tensor or image")->required()->check(CLI::ExistingFile);
  AddCommon(sub, o->common);
  AddAlign(sub, o->align);
  AddModel(sub, o->model);
  sub->callback([o] {
    const InputOptions in = o->common.Inputs();
    const LoadedInput q = LoadInput(o->query, in, "query");
    const LoadedInput t = LoadInput(o->target, in, "target");
    Scoring s = BuildScoring(o->model, o->common.epsilon);
    const AlignmentConfig align = o->align.Resolve({1, 0.0, 0.0, 4.0, 0.5});
    const FeatureMap qm = Project(q.map, s.proj_x);
    const FeatureMap tm = Project(t.map, s.proj_y);
    if (s.scorer.scheme.UsesGlobal()) {
      const std::vector<DatasetItem> qi{{"query", qm, "", 1.0}};
      const std::vector<DatasetItem> ti{{"target", tm, "", 1.0}};
      FitMissingGlobals(s.scorer, qi, ti);
    }
    SearchOptions opts;
    opts.workers = o->common.workers;
    if (q.image && Rotates(align)) {
      opts.rotated_query = [&](double angle) {
        return Project(FeaturizePixels(Rotate(*q.image, angle), in.featurizer), s.proj_x);
      };
    }
    const MatchScore best = SearchAlignments(qm, tm, align, s.scorer, opts);
    std::cout << json{{"score", best.score},
                      {"dy", best.dy},
                      {"dx", best.dx},
                      {"angle", best.angle},
                      {"overlap", best.overlap},
                      {"scheme", SchemeName(s.scorer.scheme)},
                      {"rotation_mode", RotationMode(align, q.image.has_value())}}
                     .dump()
              << "\n";
  });
}

std::string CmcText(const CmcCurve& cmc) {
  std::string text;
  for (std::size_t k = 0; k < cmc.recall_at_k.size(); ++k) {
    text += std::to_string(k + 1) + " " + Num(cmc.recall_at_k[k]) + "\n";
  }
  return text;
}

void AddRetrieve(CLI::App& app) {
  struct Opts {
    std::string manifest, out, cmc, protocol = "cross";
    int patch_size = 97;
    int n_queries = 512;
    CommonFlags common;
    AlignFlags align;
    ModelFlags model;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("retrieve", "Rank the database for every query of a manifest");
  sub->add_option("manifest", o->manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o->out, "Results, one JSON record per line (stdout when omitted)");
  sub->add_option("--cmc", o->cmc, "CMC curve, two columns");
  sub->add_option("--protocol", o->protocol,
                  "cross: manifest queries; patch: seeded patches cut from database entries")
      ->check(CLI::IsMember({"cross", "patch"}));
  sub->add_option("--patch-size", o->patch_size, "Patch side for the patch protocol");
  sub->add_option("--n-queries", o->n_queries, "Patch queries for the patch protocol");
  AddCommon(sub, o->common);
  AddAlign(sub, o->align);
  AddModel(sub, o->model);
  sub->callback([o] {
    const Manifest m = ReadManifest(o->manifest);
    const bool patch = o->protocol == "patch";
    ValidateManifest(m, /*closed_set=*/!patch);
    const InputOptions in = o->common.Inputs();
    Scoring s = BuildScoring(o->model, o->common.epsilon);

    std::vector<LoadedInput> raw_queries;
    const auto database =
        Projected(LoadItems(m, ManifestRole::kDatabase, in), s.proj_y);
    std::vector<DatasetItem> queries;
    if (!patch) {
      queries = Projected(LoadItems(m, ManifestRole::kQuery, in, &raw_queries), s.proj_x);
    }
    FitMissingGlobals(s.scorer, patch ? std::span<const DatasetItem>(database) : queries,
                      database);

    AlignmentConfig align;
    ProtocolResult result;
    bool images = false;
    if (patch) {
      align = o->align.Resolve({1, 0.0, 0.0, 4.0, 1.0});
      PatchProtocolConfig cfg;
      cfg.patch_size = o->patch_size;
      cfg.n_queries = o->n_queries;
      cfg.seed = o->common.seed;
      cfg.alignment = align;
      cfg.workers = o->common.workers;
      result = PatchRetrievalProtocol(database, cfg, s.scorer);
    } else {
      align = o->align.Resolve({2, -20.0, 20.0, 4.0, 0.5});
      images = std::all_of(raw_queries.begin(), raw_queries.end(),
                           [](const LoadedInput& q) { return q.image.has_value(); });
      QueryRotator rotator;
      if (images && Rotates(align)) {
        rotator = [&](std::size_t q, double angle) {
          return Project(FeaturizePixels(Rotate(*raw_queries[q].image, angle),
                                         in.featurizer),
                         s.proj_x);
        };
      }
      result = RetrievalRun(queries, database, align, s.scorer, o->common.workers, rotator);
    }

    std::string text =
        json{{"meta",
              {{"protocol", o->protocol},
               {"scheme", SchemeName(s.scorer.scheme)},
               {"alignment", AlignJson(align)},
               {"rotation_mode", RotationMode(align, images)},
               {"seed", o->common.seed},
               {"db_size", result.database_size},
               {"queries", result.queries.size()},
               {"map", result.mean_average_precision}}}}
            .dump() +
        "\n";
    for (const QueryResult& qr : result.queries) {
      const RankedItem& top = qr.ranked.items().front();
      const RankedItem& hit = qr.ranked.items()[qr.first_relevant_rank - 1];
      const auto pose = std::find_if(qr.scores.begin(), qr.scores.end(),
                                     [&](const MatchScore& ms) { return ms.item == hit.id; });
      text += json{{"query", qr.query_id},
                   {"rank", qr.first_relevant_rank},
                   {"score", pose->score},
                   {"dy", pose->dy},
                   {"dx", pose->dx},
                   {"angle", pose->angle},
                   {"match", database[hit.id].id},
                   {"top", database[top.id].id},
                   {"top_score", top.score},
                   {"db_size", result.database_size},
                   {"ap", qr.average_precision},
                   {"area_ratio", qr.area_ratio}}
                  .dump() +
              "\n";
    }
    Emit(o->out, text);
    if (!o->cmc.empty()) {
      const auto ranks = result.FirstRelevantRanks();
      WriteFileBytes(o->cmc, CmcText(Cmc(ranks, result.database_size)));
    }
  });
}

std::vector<double> ParseLevels(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfiguration, "bad --levels entry '" + tok + "'");
    }
  }
  return out;
}

void AddEval(CLI::App& app) {
  struct Opts {
    std::string results, cmc, occlusion, levels = "1,10";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("eval", "Metrics from a results file");
  sub->add_option("results", o->results, "Results written by retrieve")->required()->check(CLI::ExistingFile);
  sub->add_option("--cmc", o->cmc, "CMC curve, two columns (stdout when omitted)");
  sub->add_option("--occlusion", o->occlusion, "Occlusion-binned recall table");
  sub->add_option("--levels", o->levels, "Database percentages reviewed, comma separated");
  sub->callback([o] {
    const std::string bytes = ReadFileBytes(o->results);
    std::vector<std::size_t> ranks;
    std::vector<QueryOutcome> outcomes;
    std::optional<std::size_t> db_size;
    double ap_sum = 0.0;
    std::size_t ap_count = 0;
    std::stringstream lines(bytes);
    std::string line;
    std::size_t line_no = 0, offset = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      const std::size_t line_start = offset;
      offset += line.size() + 1;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw FormatError("results line " + std::to_string(line_no) + " is not JSON",
                          line_start + (e.byte > 0 ? e.byte - 1 : 0));
      }
      if (rec.contains("meta")) continue;
      if (!rec.contains("rank") || !rec.contains("db_size")) {
        throw FormatError("results line " + std::to_string(line_no) +
                              " lacks rank or db_size",
                          line_start);
      }
      const auto n = rec["db_size"].get<std::size_t>();
      if (db_size && *db_size != n) {
        throw Error(ErrorCode::kFormat, "results mix database sizes");
      }
      db_size = n;
      const auto rank = rec["rank"].get<std::size_t>();
      ranks.push_back(rank);
      outcomes.push_back({rank, rec.value("area_ratio", 1.0)});
      if (rec.contains("ap")) {
        ap_sum += rec["ap"].get<double>();
        ++ap_count;
      }
    }
    if (ranks.empty()) throw Error(ErrorCode::kFormat, "results file has no records");
    const CmcCurve cmc = Cmc(ranks, *db_size);
    const OcclusionReport occ = OcclusionBinnedReport(outcomes, *db_size, ParseLevels(o->levels));
    json summary = {{"queries", ranks.size()}, {"db_size", *db_size}};
    if (ap_count == ranks.size()) summary["map"] = ap_sum / static_cast<double>(ap_count);
    summary["top1"] = cmc.recall_at_k.front();
    json bins = json::array();
    for (const auto& row : occ.rows) {
      bins.push_back({{"bin", std::string(OcclusionBinName(row.bin))},
                      {"count", row.count},
                      {"recall_percent", row.recall_percent}});
    }
    summary["occlusion"] = {{"levels_percent", occ.levels_percent},
                            {"items_reviewed", occ.items_reviewed},
                            {"bins", bins}};
    if (o->cmc.empty()) {
      std::cout << CmcText(cmc);
    } else {
      WriteFileBytes(o->cmc, CmcText(cmc));
      std::cout << summary.dump() << "\n";
    }
    if (!o->occlusion.empty()) {
      std::string text = "bin count";
      for (double l : occ.levels_percent) text += " top" + Num(l) + "%";
      text += "\n";
      for (const auto& row : occ.rows) {
        text += std::string(OcclusionBinName(row.bin)) + " " + std::to_string(row.count);
        for (double r : row.recall_percent) text += " " + Num(r);
        text += "\n";
      }
      WriteFileBytes(o->occlusion, text);
    }
  });
}

void AddBench(CLI::App& app) {
  struct Opts {
    std::string out_dir;
    BenchmarkConfig cfg;
    int queries_per_source = 2;
    int min_side = 12;
    CommonFlags common;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("bench", "Write the seeded synthetic cross-domain benchmark");
  sub->add_option("--out-dir", o->out_dir, "Directory for tensors and manifests")->required();
  sub->add_option("--sources", o->cfg.sources, "Distinct sources");
  sub->add_option("--impressions", o->cfg.impressions_per_source, "Clean impressions per source");
  sub->add_option("--latent", o->cfg.latent_channels, "Shared latent channels");
  sub->add_option("--nuisance", o->cfg.nuisance_channels, "Domain-specific nuisance channels");
  sub->add_option("--height", o->cfg.height, "Map height");
  sub->add_option("--width", o->cfg.width, "Map width");
  sub->add_option("--queries-per-source", o->queries_per_source, "Scene crops per source");
  sub->add_option("--min-side", o->min_side, "Smallest crop side");
  AddCommon(sub, o->common);
  sub->callback([o] {
    const DType dtype = ParseDType(o->common.precision);
    const SyntheticBenchmark bench = GenerateBenchmark(o->cfg, o->common.seed);
    std::vector<int> sources(static_cast<std::size_t>(o->cfg.sources));
    for (int i = 0; i < o->cfg.sources; ++i) sources[static_cast<std::size_t>(i)] = i;
    const auto queries =
        SceneQueries(bench, sources, o->queries_per_source, o->min_side, o->common.seed);
    const auto db = ImpressionDatabase(bench, sources);

    const fs::path dir(o->out_dir);
    fs::create_directories(dir / "tensors");
    auto write_items = [&](const std::vector<DatasetItem>& items, ManifestRole role,
                           Manifest& m) {
      for (const auto& it : items) {
        const std::string rel = "tensors/" + it.id + ".xct";
        WriteFeatureMap(dir / rel, it.map, dtype);
        ManifestEntry e{it.id, role, it.map.domain_tag(), rel, it.group, std::nullopt};
        if (role == ManifestRole::kQuery) e.area_ratio = it.area_ratio;
        m.items.push_back(std::move(e));
      }
    };
    Manifest cross;
    write_items(queries, ManifestRole::kQuery, cross);
    write_items(db, ManifestRole::kDatabase, cross);
    WriteManifest(dir / "manifest.json", cross);

    Manifest patches;
    write_items(bench.impressions, ManifestRole::kDatabase, patches);
    WriteManifest(dir / "patches.json", patches);
  });
}

}  // namespace

void RegisterCommands(CLI::App& app) {
  AddFeaturize(app);
  AddStats(app);
  AddFitPca(app);
  AddFitCca(app);
  AddTrain(app);
  AddMatch(app);
  AddRetrieve(app);
  AddEval(app);
  AddBench(app);
}

}  // namespace crossmatch::cli
