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

#include "crossmatch/learn.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "crossmatch/parallel.h"

namespace crossmatch {

namespace {

// Standardized values of one channel over a pixel set.
struct Standardized {
  std::vector<double> values;  // aligned with the pixel list
  double stddev = 0.0;         // population stddev before the floor
  double divisor = 0.0;        // max(stddev, epsilon)
};

Standardized StandardizeOver(std::span<const double> v,
                             const std::vector<std::size_t>& pixels,
                             double epsilon) {
  const double n = static_cast<double>(pixels.size());
  double sum = 0.0;
  for (std::size_t i : pixels) sum += v[i];
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i : pixels) ss += (v[i] - mean) * (v[i] - mean);
  Standardized s;
  s.stddev = std::sqrt(ss / n);
  s.divisor = std::max(s.stddev, epsilon);
  s.values.resize(pixels.size());
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    s.values[k] = (v[pixels[k]] - mean) / s.divisor;
  }
  return s;
}

// Gradient of NCC(x, y) with respect to x at each listed pixel.
std::vector<double> GradientOver(const Standardized& x, const Standardized& y,
                                 double ncc) {
  const double n = static_cast<double>(x.values.size());
  std::vector<double> g(x.values.size());
  // Below the floor the divisor is a constant and only the mean term moves.
  const bool floored = x.stddev < x.divisor;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (floored) {
      g[k] = y.values[k] / (n * x.divisor);
    } else {
      g[k] = (y.values[k] - x.values[k] * ncc) / (n * x.stddev);
    }
  }
  return g;
}

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

struct PairTerms {
  double loss = 0.0;
  bool active = false;
  std::vector<double> ncc;
  Eigen::MatrixXd grad_u;
  Eigen::MatrixXd grad_v;
};

double Margin(const SiameseModel& model, int z, double score) {
  return model.hinge == HingeForm::kThreshold
             ? 1.0 - z * (score - model.weights.bias)
             : 1.0 - z * score + model.weights.bias;
}

void CheckPairShape(const TrainingPair& p, const SiameseModel& model) {
  if (p.z != 1 && p.z != -1) {
    throw Error(ErrorCode::kInvalidArgument, "pair labels must be +1 or -1");
  }
  if (p.x.channels() != model.input_dim_x() ||
      p.y.channels() != model.input_dim_y()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pair channel counts do not match the model projections");
  }
  if (p.x.height() != p.y.height() || p.x.width() != p.y.width()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pair maps must be aligned and equally sized");
  }
}

PairTerms EvaluatePair(const TrainingPair& p, const SiameseModel& model,
                       double epsilon, bool with_gradients) {
  CheckPairShape(p, model);
  const FeatureMap xh = ApplyProjection(p.x, model.proj_x);
  const FeatureMap yh = ApplyProjection(p.y, model.proj_y);
  const ChannelView views[] = {xh.channel_view(0), yh.channel_view(0)};
  const auto pixels =
      SupportRegion::Full(xh).Pixels(xh.height(), xh.width(), views);
  const int k_dim = model.output_dim();
  const double n = static_cast<double>(pixels.size());

  PairTerms t;
  t.ncc.resize(k_dim);
  std::vector<Standardized> xs(k_dim), ys(k_dim);
  double score = 0.0;
  for (int k = 0; k < k_dim; ++k) {
    xs[k] = StandardizeOver(xh.channel(k), pixels, epsilon);
    ys[k] = StandardizeOver(yh.channel(k), pixels, epsilon);
    t.ncc[k] = Dot(xs[k].values, ys[k].values) / n;
    score += model.weights.weights[k] * t.ncc[k];
  }
  const double margin = Margin(model, p.z, score);
  t.active = margin > 0.0;
  t.loss = std::max(0.0, margin);
  if (!with_gradients || !t.active) return t;

  t.grad_u = Eigen::MatrixXd::Zero(k_dim, model.input_dim_x());
  t.grad_v = Eigen::MatrixXd::Zero(k_dim, model.input_dim_y());
  for (int k = 0; k < k_dim; ++k) {
    const double upstream = -p.z * model.weights.weights[k];
    if (upstream == 0.0) continue;
    const auto gx = GradientOver(xs[k], ys[k], t.ncc[k]);
    const auto gy = GradientOver(ys[k], xs[k], t.ncc[k]);
    // d xh_k[j] / d U[k, m] = x_m[j] - mean_m.
    for (int m = 0; m < model.input_dim_x(); ++m) {
      const auto xm = p.x.channel(m);
      const double mu = model.proj_x.mean[m];
      double acc = 0.0;
      for (std::size_t j = 0; j < pixels.size(); ++j) {
        acc += gx[j] * (xm[pixels[j]] - mu);
      }
      t.grad_u(k, m) = upstream * acc;
    }
    for (int m = 0; m < model.input_dim_y(); ++m) {
      const auto ym = p.y.channel(m);
      const double mu = model.proj_y.mean[m];
      double acc = 0.0;
      for (std::size_t j = 0; j < pixels.size(); ++j) {
        acc += gy[j] * (ym[pixels[j]] - mu);
      }
      t.grad_v(k, m) = upstream * acc;
    }
  }
  return t;
}

double Regularizer(const SiameseModel& model) {
  double w2 = 0.0;
  for (double w : model.weights.weights) w2 += w * w;
  return 0.5 * model.alpha * w2 +
         0.5 * model.beta *
             (model.proj_x.matrix.squaredNorm() +
              model.proj_y.matrix.squaredNorm());
}

}  // namespace

SiameseModel SiameseModel::Untrained(int channels) {
  SiameseModel m;
  m.proj_x = Projection::Identity(channels);
  m.proj_y = Projection::Identity(channels);
  m.weights = ChannelWeights::Uniform(channels);
  return m;
}

void SiameseModel::Validate() const {
  if (proj_x.output_dim() != proj_y.output_dim() ||
      weights.weights.size() != static_cast<std::size_t>(proj_x.output_dim()) ||
      proj_x.mean.size() != proj_x.input_dim() ||
      proj_y.mean.size() != proj_y.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model dimensions are inconsistent: U is " +
                    std::to_string(proj_x.output_dim()) + "x" +
                    std::to_string(proj_x.input_dim()) + ", V is " +
                    std::to_string(proj_y.output_dim()) + "x" +
                    std::to_string(proj_y.input_dim()) + ", W has " +
                    std::to_string(weights.weights.size()) + " entries");
  }
}

std::vector<double> NccGradient(const ChannelView& x, const ChannelView& y,
                                const SupportRegion& region, double epsilon) {
  if (x.height != y.height || x.width != y.width) {
    throw Error(ErrorCode::kDimensionMismatch, "channels differ in size");
  }
  const ChannelView views[] = {x, y};
  const auto pixels = region.Pixels(x.height, x.width, views);
  const Standardized xs = StandardizeOver(x.values, pixels, epsilon);
  const Standardized ys = StandardizeOver(y.values, pixels, epsilon);
  const double ncc = Dot(xs.values, ys.values) / static_cast<double>(pixels.size());
  const auto g = GradientOver(xs, ys, ncc);
  std::vector<double> out(static_cast<std::size_t>(x.height) * x.width, 0.0);
  for (std::size_t k = 0; k < pixels.size(); ++k) out[pixels[k]] = g[k];
  return out;
}

double LossForward(const PairBatch& batch, const SiameseModel& model,
                   double epsilon) {
  model.Validate();
  double loss = 0.0;
  for (const auto& p : batch) {
    loss += EvaluatePair(p, model, epsilon, /*with_gradients=*/false).loss;
  }
  return loss + Regularizer(model);
}

ModelGradients LossBackward(const PairBatch& batch, const SiameseModel& model,
                            double epsilon, double reg_scale, int workers) {
  model.Validate();
  std::vector<PairTerms> terms(batch.size());
  ParallelFor(batch.size(), workers, [&](std::size_t i) {
    terms[i] = EvaluatePair(batch[i], model, epsilon, /*with_gradients=*/true);
  });

  const int k_dim = model.output_dim();
  ModelGradients g;
  g.weights.assign(k_dim, 0.0);
  g.proj_x = Eigen::MatrixXd::Zero(k_dim, model.input_dim_x());
  g.proj_y = Eigen::MatrixXd::Zero(k_dim, model.input_dim_y());
  // Fixed summation order keeps results independent of the worker count.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PairTerms& t = terms[i];
    g.loss += t.loss;
    if (!t.active) continue;
    ++g.active_pairs;
    const int z = batch[i].z;
    for (int k = 0; k < k_dim; ++k) g.weights[k] -= z * t.ncc[k];
    g.bias += model.hinge == HingeForm::kThreshold ? z : 1.0;
    g.proj_x += t.grad_u;
    g.proj_y += t.grad_v;
  }
  g.loss += reg_scale * Regularizer(model);
  for (int k = 0; k < k_dim; ++k) {
    g.weights[k] += reg_scale * model.alpha * model.weights.weights[k];
  }
  g.proj_x += reg_scale * model.beta * model.proj_x.matrix;
  g.proj_y += reg_scale * model.beta * model.proj_y.matrix;
  return g;
}

std::string RegimeName(TrainRegime regime) {
  switch (regime) {
    case TrainRegime::kWeightsOnly: return "weights";
    case TrainRegime::kProjectionsFixed: return "cca-weights";
    case TrainRegime::kJoint: return "joint";
  }
  return "weights";
}

TrainRegime ParseRegime(const std::string& name) {
  if (name == "weights") return TrainRegime::kWeightsOnly;
  if (name == "cca-weights") return TrainRegime::kProjectionsFixed;
  if (name == "joint") return TrainRegime::kJoint;
  throw Error(ErrorCode::kConfiguration, "unknown training regime '" + name + "'");
}

TrainConfig TrainConfig::ForRegime(TrainRegime regime) {
  TrainConfig cfg;
  const bool joint = regime == TrainRegime::kJoint;
  cfg.freeze_proj_x = !joint;
  cfg.freeze_proj_y = !joint;
  return cfg;
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kConfiguration, "learning rate must be positive");
  }
  if (epochs < 0) {
    throw Error(ErrorCode::kConfiguration, "epochs must be nonnegative");
  }
  if (batch_size < 1) {
    throw Error(ErrorCode::kConfiguration, "batch size must be >= 1");
  }
}

TrainResult Train(const SiameseModel& initial, const PairBatch& train,
                  const PairBatch* validation, const TrainConfig& cfg) {
  cfg.Validate();
  SiameseModel model = initial;
  if (cfg.w_init) {
    model.weights.weights = *cfg.w_init;
  }
  model.Validate();

  TrainResult result;
  result.model = model;
  if (cfg.epochs == 0) {
    result.best_validation_loss =
        train.empty() ? 0.0
                      : LossForward(validation ? *validation : train, model,
                                    cfg.epsilon);
    return result;
  }
  if (train.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "training needs at least one pair");
  }
  const PairBatch& held_out = validation ? *validation : train;
  result.best_validation_loss = LossForward(held_out, model, cfg.epsilon);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  long iteration = 0;
  PairBatch batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      const double share =
          static_cast<double>(batch.size()) / static_cast<double>(train.size());
      const ModelGradients g =
          LossBackward(batch, model, cfg.epsilon, share, cfg.workers);
      ++iteration;
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorCode::kNumerical,
                    "training diverged at iteration " + std::to_string(iteration) +
                        " (epoch " + std::to_string(epoch) + ")");
      }
      const double lr = cfg.learning_rate;
      if (!cfg.freeze_weights) {
        for (std::size_t k = 0; k < g.weights.size(); ++k) {
          model.weights.weights[k] -= lr * g.weights[k];
        }
      }
      if (!cfg.freeze_bias) model.weights.bias -= lr * g.bias;
      if (!cfg.freeze_proj_x) model.proj_x.matrix -= lr * g.proj_x;
      if (!cfg.freeze_proj_y) model.proj_y.matrix -= lr * g.proj_y;
    }
    const double loss = LossForward(held_out, model, cfg.epsilon);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNumerical,
                  "training diverged at iteration " + std::to_string(iteration) +
                      " (epoch " + std::to_string(epoch) + ")");
    }
    result.validation_history.push_back(loss);
    if (loss < result.best_validation_loss) {
      result.best_validation_loss = loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
KFoldSplits(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2 || static_cast<std::size_t>(folds) > n) {
    throw Error(ErrorCode::kConfiguration,
                "k-fold needs 2 <= folds <= item count");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out(folds);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = i % static_cast<std::size_t>(folds);
    for (int g = 0; g < folds; ++g) {
      auto& split = out[g];
      (static_cast<std::size_t>(g) == f ? split.second : split.first)
          .push_back(order[i]);
    }
  }
  for (auto& [tr, te] : out) {
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
  }
  return out;
}

double SelectAlphaByCrossValidation(const SiameseModel& initial,
                                    const PairBatch& pairs,
                                    const std::vector<double>& alphas,
                                    int folds, const TrainConfig& cfg) {
  if (alphas.empty()) {
    throw Error(ErrorCode::kConfiguration, "no alpha candidates given");
  }
  const auto splits = KFoldSplits(pairs.size(), folds, cfg.seed);
  double best_alpha = alphas.front();
  double best = std::numeric_limits<double>::infinity();
  for (double alpha : alphas) {
    double total = 0.0;
    for (const auto& [tr, te] : splits) {
      PairBatch train_part, test_part;
      for (std::size_t i : tr) train_part.push_back(pairs[i]);
      for (std::size_t i : te) test_part.push_back(pairs[i]);
      SiameseModel m = initial;
      m.alpha = alpha;
      const TrainResult r = Train(m, train_part, nullptr, cfg);
      // Held-out data term only, so candidates are compared on equal footing.
      SiameseModel probe = r.model;
      probe.alpha = 0.0;
      probe.beta = 0.0;
      total += LossForward(test_part, probe, cfg.epsilon) /
               static_cast<double>(test_part.size());
    }
    if (total < best) {
      best = total;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

double PairAccuracy(const PairBatch& batch, const SiameseModel& model,
                    double epsilon) {
  if (batch.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "accuracy of an empty batch");
  }
  model.Validate();
  std::size_t correct = 0;
  for (const auto& p : batch) {
    const PairTerms t = EvaluatePair(p, model, epsilon, false);
    double score = 0.0;
    for (std::size_t k = 0; k < t.ncc.size(); ++k) {
      score += model.weights.weights[k] * t.ncc[k];
    }
    const int predicted = score - model.weights.bias > 0.0 ? 1 : -1;
    correct += predicted == p.z;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

Scorer ModelScorer(const SiameseModel& model, double epsilon) {
  Scorer s;
  s.scheme = NormalizationScheme::Mcncc();
  s.weights = model.weights.weights;
  s.epsilon = epsilon;
  return s;
}

CcaResult FitCcaOnPairs(const PairBatch& pairs, int k, double ridge) {
  std::vector<FeatureMap> xs, ys;
  for (const auto& p : pairs) {
    if (p.z == 1) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
  }
  if (xs.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "CCA needs at least one positive pair");
  }
  Eigen::MatrixXd sx, sy;
  PairedPixelSamples(xs, ys, &sx, &sy);
  return FitCca(sx, sy, k, ridge, xs.front().domain_tag(),
                ys.front().domain_tag());
}

TrainingPair AlignPair(const FeatureMap& x, const FeatureMap& y, int z,
                       const AlignmentConfig& cfg, double epsilon) {
  if (x.height() == y.height() && x.width() == y.width()) {
    return {x, y, z};
  }
  Scorer scorer;
  scorer.epsilon = epsilon;
  const MatchScore best = SearchAlignments(x, y, cfg, scorer);
  const FeatureMap xr = best.angle == 0.0 ? x : Rotate(x, best.angle);
  const int i0 = std::max(0, -best.dy);
  const int i1 = std::min(xr.height(), y.height() - best.dy);
  const int j0 = std::max(0, -best.dx);
  const int j1 = std::min(xr.width(), y.width() - best.dx);
  return {ExtractPatch(xr, i0, j0, i1 - i0, j1 - j0),
          ExtractPatch(y, i0 + best.dy, j0 + best.dx, i1 - i0, j1 - j0), z};
}

}  // namespace crossmatch
