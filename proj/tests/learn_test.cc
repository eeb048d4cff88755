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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace crossmatch {
namespace {

using testing::MaxRelativeError;
using testing::RandomMap;

constexpr double kStep = 1e-5;

FeatureMap Perturbed(const FeatureMap& m, std::size_t index, double delta) {
  std::vector<double> v(m.values().begin(), m.values().end());
  v[index] += delta;
  return FeatureMap(m.channels(), m.height(), m.width(), std::move(v), m.domain_tag(),
                    std::vector<std::uint8_t>(m.mask().begin(), m.mask().end()));
}

double Ncc(const FeatureMap& x, const FeatureMap& y, const SupportRegion& r) {
  return NccSingle(x.channel_view(0), y.channel_view(0), r);
}

TEST(NccGradientTest, StationaryAtExtremes) {
  std::mt19937_64 rng(1);
  const FeatureMap x = RandomMap(rng, 1, 5, 5);
  std::vector<double> neg(x.values().begin(), x.values().end());
  for (double& v : neg) v = -v;
  const FeatureMap y(1, 5, 5, neg);
  const SupportRegion r = SupportRegion::Full(x);
  for (double g : NccGradient(x.channel_view(0), x.channel_view(0), r)) {
    EXPECT_NEAR(g, 0.0, 1e-10);
  }
  for (double g : NccGradient(x.channel_view(0), y.channel_view(0), r)) {
    EXPECT_NEAR(g, 0.0, 1e-10);
  }
}

TEST(NccGradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap x = RandomMap(rng, 1, 5, 5);
    const FeatureMap y = RandomMap(rng, 1, 5, 5);
    const SupportRegion r = SupportRegion::Full(x);
    const auto analytic = NccGradient(x.channel_view(0), y.channel_view(0), r);
    std::vector<double> numeric(25);
    for (std::size_t j = 0; j < 25; ++j) {
      numeric[j] = (Ncc(Perturbed(x, j, kStep), y, r) - Ncc(Perturbed(x, j, -kStep), y, r)) /
                   (2 * kStep);
    }
    EXPECT_LT(MaxRelativeError(analytic, numeric), 1e-5);
  }
}

TEST(NccGradientTest, ZeroOutsideRegionAndOnSubRegion) {
  std::mt19937_64 rng(3);
  const FeatureMap x = RandomMap(rng, 1, 6, 6);
  const FeatureMap y = RandomMap(rng, 1, 6, 6);
  const SupportRegion r(1, 2, 4, 3);
  const auto analytic = NccGradient(x.channel_view(0), y.channel_view(0), r);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i * 6 + j);
      const double fd =
          (Ncc(Perturbed(x, idx, kStep), y, r) - Ncc(Perturbed(x, idx, -kStep), y, r)) /
          (2 * kStep);
      if (!r.contains(i, j)) EXPECT_EQ(analytic[idx], 0.0);
      EXPECT_NEAR(analytic[idx], fd, 1e-8);
    }
  }
}

TEST(NccGradientTest, OrthogonalToOnesAndStandardizedInput) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const FeatureMap x = RandomMap(rng, 1, 7, 6);
    const FeatureMap y = RandomMap(rng, 1, 7, 6);
    const SupportRegion r = SupportRegion::Full(x);
    const auto g = NccGradient(x.channel_view(0), y.channel_view(0), r);
    const auto s = ComputeChannelStats(x, r);
    double sum = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      sum += g[j];
      dot += g[j] * (x.values()[j] - s.means[0]) / s.stddevs[0];
    }
    EXPECT_NEAR(sum, 0.0, 1e-10);
    EXPECT_NEAR(dot, 0.0, 1e-10);
  }
}

TEST(NccGradientTest, PrintedPlusSignFailsTheOracle) {
  // (y~ + x~ NCC) / (|P| sigma) is not the derivative.
  std::mt19937_64 rng(5);
  const FeatureMap x = RandomMap(rng, 1, 5, 5);
  const FeatureMap y = RandomMap(rng, 1, 5, 5);
  const SupportRegion r = SupportRegion::Full(x);
  const auto sx = ComputeChannelStats(x, r), sy = ComputeChannelStats(y, r);
  const double ncc = Ncc(x, y, r);
  std::vector<double> plus(25), numeric(25);
  for (std::size_t j = 0; j < 25; ++j) {
    const double xt = (x.values()[j] - sx.means[0]) / sx.stddevs[0];
    const double yt = (y.values()[j] - sy.means[0]) / sy.stddevs[0];
    plus[j] = (yt + xt * ncc) / (25.0 * sx.stddevs[0]);
    numeric[j] = (Ncc(Perturbed(x, j, kStep), y, r) - Ncc(Perturbed(x, j, -kStep), y, r)) /
                 (2 * kStep);
  }
  EXPECT_GT(MaxRelativeError(plus, numeric), 1e-2);
}

PairBatch RandomBatch(std::mt19937_64& rng, int n, int c, int h, int w) {
  PairBatch batch;
  for (int i = 0; i < n; ++i) {
    batch.push_back({RandomMap(rng, c, h, w), RandomMap(rng, c, h, w), i % 2 ? -1 : 1});
  }
  return batch;
}

TEST(LossForwardTest, ZeroModelCostsOnePerPair) {
  std::mt19937_64 rng(6);
  const PairBatch batch = RandomBatch(rng, 5, 2, 4, 4);
  SiameseModel m = SiameseModel::Untrained(2);
  m.weights.weights = {0.0, 0.0};
  m.alpha = m.beta = 0.0;
  EXPECT_DOUBLE_EQ(LossForward(batch, m), 5.0);
}

TEST(LossForwardTest, SatisfiedMarginCostsNothing) {
  std::mt19937_64 rng(7);
  const FeatureMap x = RandomMap(rng, 3, 5, 5);
  SiameseModel m = SiameseModel::Untrained(3);
  m.alpha = m.beta = 0.0;
  m.weights.weights = {0.5, 0.5, 0.5};  // MCNCC_W = 1.5
  m.weights.bias = 0.25;
  EXPECT_EQ(LossForward({{x, x, 1}}, m), 0.0);
}

TEST(LossForwardTest, RegularizerOnlyByHand) {
  std::mt19937_64 rng(8);
  const FeatureMap x = RandomMap(rng, 2, 4, 4);
  SiameseModel m = SiameseModel::Untrained(2);
  m.proj_x.matrix << 1.0, 0.0, 0.0, 2.0;
  m.proj_y.matrix << 0.5, 0.0, 0.0, -3.0;
  m.weights.weights = {1.5, 1.0};
  m.alpha = 100.0;
  m.beta = 1.0;
  // Channel 1 flips sign, so NCC is (1, -1) and the score is 0.5.
  const FeatureMap px = ApplyProjection(x, m.proj_x);
  const FeatureMap py = ApplyProjection(x, m.proj_y);
  const double s = McnccWeighted(px, py, SupportRegion::Full(px), m.weights);
  ASSERT_NEAR(s, 0.5, 1e-12);
  m.weights.bias = -0.75;
  const double expected = 100.0 / 2.0 * (1.5 * 1.5 + 1.0) +
                          1.0 / 2.0 * ((1 + 4) + (0.25 + 9));
  EXPECT_NEAR(LossForward({{x, x, 1}}, m), expected, 1e-12);
}

TEST(LossForwardTest, UniformWeightsDependOnlyOnMcncc) {
  std::mt19937_64 rng(9);
  const PairBatch batch = RandomBatch(rng, 6, 3, 5, 5);
  SiameseModel m = SiameseModel::Untrained(3);
  m.alpha = 0.0;
  m.beta = 0.0;
  double expected = 0.0;
  for (const auto& p : batch) {
    expected += std::max(0.0, 1.0 - p.z * Mcncc(p.x, p.y, SupportRegion::Full(p.x)));
  }
  EXPECT_NEAR(LossForward(batch, m), expected, 1e-12);
}

TEST(LossBackwardTest, InactiveAndUnregularizedIsZero) {
  std::mt19937_64 rng(10);
  const FeatureMap x = RandomMap(rng, 2, 4, 4);
  SiameseModel m = SiameseModel::Untrained(2);
  m.weights.weights = {1.0, 1.0};
  m.alpha = m.beta = 0.0;
  const ModelGradients g = LossBackward({{x, x, 1}}, m);
  EXPECT_EQ(g.active_pairs, 0u);
  EXPECT_EQ(g.bias, 0.0);
  for (double v : g.weights) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(g.proj_x.isZero(0.0));
  EXPECT_TRUE(g.proj_y.isZero(0.0));
}

// Central differences of LossForward with respect to every trainable
// parameter, flattened as W, b, U, V.
std::vector<double> NumericGradient(const PairBatch& batch, const SiameseModel& m) {
  std::vector<double> out;
  auto probe = [&](auto&& set) {
    SiameseModel plus = m, minus = m;
    set(plus, kStep);
    set(minus, -kStep);
    out.push_back((LossForward(batch, plus) - LossForward(batch, minus)) / (2 * kStep));
  };
  for (std::size_t k = 0; k < m.weights.weights.size(); ++k) {
    probe([k](SiameseModel& s, double d) { s.weights.weights[k] += d; });
  }
  probe([](SiameseModel& s, double d) { s.weights.bias += d; });
  for (Eigen::Index i = 0; i < m.proj_x.matrix.size(); ++i) {
    probe([i](SiameseModel& s, double d) { s.proj_x.matrix.data()[i] += d; });
  }
  for (Eigen::Index i = 0; i < m.proj_y.matrix.size(); ++i) {
    probe([i](SiameseModel& s, double d) { s.proj_y.matrix.data()[i] += d; });
  }
  return out;
}

std::vector<double> Flatten(const ModelGradients& g) {
  std::vector<double> out = g.weights;
  out.push_back(g.bias);
  out.insert(out.end(), g.proj_x.data(), g.proj_x.data() + g.proj_x.size());
  out.insert(out.end(), g.proj_y.data(), g.proj_y.data() + g.proj_y.size());
  return out;
}

SiameseModel RandomModel(std::mt19937_64& rng, int n, int k) {
  std::normal_distribution<double> g(0.0, 1.0);
  SiameseModel m;
  m.proj_x.matrix = Eigen::MatrixXd::NullaryExpr(k, n, [&] { return g(rng); });
  m.proj_y.matrix = Eigen::MatrixXd::NullaryExpr(k, n, [&] { return g(rng); });
  m.proj_x.mean = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.1 * g(rng); });
  m.proj_y.mean = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.1 * g(rng); });
  m.weights.weights.resize(static_cast<std::size_t>(k));
  for (double& w : m.weights.weights) w = 0.5 + 0.5 * std::abs(g(rng));
  m.weights.bias = 0.1 * g(rng);
  m.alpha = 0.5;
  m.beta = 0.25;
  return m;
}

TEST(LossBackwardTest, WeightGradientOnTwoPairs) {
  std::mt19937_64 rng(11);
  const PairBatch batch = RandomBatch(rng, 2, 3, 5, 5);
  SiameseModel m = SiameseModel::Untrained(3);
  m.weights.weights = {0.3, 0.7, 0.2};
  m.weights.bias = 0.05;
  const ModelGradients g = LossBackward(batch, m);
  const auto numeric = NumericGradient(batch, m);
  EXPECT_LT(MaxRelativeError(g.weights, {numeric.begin(), numeric.begin() + 3}), 1e-5);
}

TEST(LossBackwardTest, ProjectionGradientOnToy) {
  std::mt19937_64 rng(12);
  const PairBatch batch = RandomBatch(rng, 3, 3, 4, 4);
  const SiameseModel m = RandomModel(rng, 3, 2);
  const ModelGradients g = LossBackward(batch, m);
  ASSERT_GT(g.active_pairs, 0u);
  EXPECT_LT(MaxRelativeError(Flatten(g), NumericGradient(batch, m)), 1e-4);
}

TEST(LossBackwardTest, AsPrintedBiasGradientCountsActivePairs) {
  std::mt19937_64 rng(13);
  const PairBatch batch = RandomBatch(rng, 4, 2, 4, 4);
  SiameseModel m = RandomModel(rng, 2, 2);
  m.hinge = HingeForm::kAsPrinted;
  const ModelGradients g = LossBackward(batch, m);
  EXPECT_EQ(g.bias, static_cast<double>(g.active_pairs));
  EXPECT_LT(MaxRelativeError(Flatten(g), NumericGradient(batch, m)), 1e-4);
}

TEST(LossBackwardTest, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(14);
  const PairBatch batch = RandomBatch(rng, 7, 3, 5, 5);
  const SiameseModel m = RandomModel(rng, 3, 3);
  const auto a = Flatten(LossBackward(batch, m, kDefaultEpsilon, 1.0, 1));
  const auto b = Flatten(LossBackward(batch, m, kDefaultEpsilon, 1.0, 4));
  EXPECT_EQ(a, b);
}

TEST(ModelTest, UntrainedScoresAreMcncc) {
  std::mt19937_64 rng(15);
  const FeatureMap x = RandomMap(rng, 4, 6, 6);
  const FeatureMap y = RandomMap(rng, 4, 6, 6);
  const SiameseModel m = SiameseModel::Untrained(4);
  const Scorer s = ModelScorer(m);
  const SupportRegion r = SupportRegion::Full(x);
  EXPECT_NEAR(RegionScore(ApplyProjection(x, m.proj_x), ApplyProjection(y, m.proj_y), r, s),
              Mcncc(x, y, r), 1e-12);
  EXPECT_EQ(m.weights.bias, 0.0);
}

TEST(ModelTest, ValidateCatchesShapeMismatch) {
  SiameseModel m = SiameseModel::Untrained(3);
  m.weights.weights.pop_back();
  EXPECT_THROW(m.Validate(), Error);
  EXPECT_THROW(LossForward({}, m), Error);
}

// Positives share a latent channel; negatives are independent noise. Only
// channel 0 carries the signal.
PairBatch SeparablePairs(std::mt19937_64& rng, int n) {
  PairBatch batch;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const int z = i % 2 ? -1 : 1;
    std::vector<double> xv(3 * 36), yv(3 * 36);
    for (double& v : xv) v = g(rng);
    for (double& v : yv) v = g(rng);
    if (z == 1) {
      for (int j = 0; j < 36; ++j) yv[j] = xv[j] + 0.3 * g(rng);
    }
    batch.push_back({FeatureMap(3, 6, 6, xv), FeatureMap(3, 6, 6, yv), z});
  }
  return batch;
}

TEST(TrainTest, ZeroEpochsReturnsInitialModel) {
  std::mt19937_64 rng(16);
  const PairBatch batch = RandomBatch(rng, 4, 2, 4, 4);
  const SiameseModel m = RandomModel(rng, 2, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = Train(m, batch, nullptr, cfg);
  EXPECT_EQ(r.model.weights.weights, m.weights.weights);
  EXPECT_EQ(r.model.weights.bias, m.weights.bias);
  EXPECT_EQ(r.model.proj_x.matrix, m.proj_x.matrix);
  EXPECT_EQ(r.best_epoch, 0);
}

TEST(TrainTest, WeightsOnlySeparatesHeldOutPairs) {
  std::mt19937_64 rng(17);
  const PairBatch train = SeparablePairs(rng, 60);
  const PairBatch test = SeparablePairs(rng, 40);
  SiameseModel m = SiameseModel::Untrained(3);
  m.alpha = 1e-3;
  TrainConfig cfg = TrainConfig::ForRegime(TrainRegime::kWeightsOnly);
  cfg.learning_rate = 0.05;
  cfg.epochs = 50;
  cfg.batch_size = 10;
  cfg.seed = 3;
  const TrainResult r = Train(m, train, nullptr, cfg);
  EXPECT_EQ(PairAccuracy(test, r.model), 1.0);
  EXPECT_LT(PairAccuracy(test, m), 1.0);
  EXPECT_GT(r.model.weights.weights[0], r.model.weights.weights[1]);
}

TEST(TrainTest, DeterministicUnderSeedAndWorkers) {
  std::mt19937_64 rng(18);
  const PairBatch train = SeparablePairs(rng, 24);
  const SiameseModel m = RandomModel(rng, 3, 3);
  TrainConfig cfg = TrainConfig::ForRegime(TrainRegime::kJoint);
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.learning_rate = 0.01;
  cfg.seed = 9;
  const TrainResult a = Train(m, train, nullptr, cfg);
  cfg.workers = 4;
  const TrainResult b = Train(m, train, nullptr, cfg);
  EXPECT_EQ(a.model.weights.weights, b.model.weights.weights);
  EXPECT_EQ(a.model.proj_x.matrix, b.model.proj_x.matrix);
  EXPECT_EQ(a.validation_history, b.validation_history);
}

TEST(TrainTest, FrozenGroupsStayPut) {
  std::mt19937_64 rng(19);
  const PairBatch train = SeparablePairs(rng, 10);
  const SiameseModel m = RandomModel(rng, 3, 3);
  TrainConfig cfg = TrainConfig::ForRegime(TrainRegime::kWeightsOnly);
  cfg.epochs = 2;
  cfg.freeze_bias = true;
  cfg.learning_rate = 0.01;
  const PairBatch* none = nullptr;
  const TrainResult r = Train(m, train, none, cfg);
  EXPECT_EQ(r.model.proj_x.matrix, m.proj_x.matrix);
  EXPECT_EQ(r.model.proj_y.matrix, m.proj_y.matrix);
  EXPECT_EQ(r.model.weights.bias, m.weights.bias);
}

TEST(TrainTest, DivergenceReportsIteration) {
  std::mt19937_64 rng(20);
  const PairBatch train = SeparablePairs(rng, 8);
  SiameseModel m = SiameseModel::Untrained(3);
  m.alpha = 1.0;
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  cfg.batch_size = 2;
  try {
    Train(m, train, nullptr, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

TEST(TrainTest, ConfigValidation) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), Error);
  EXPECT_EQ(ParseRegime("cca-weights"), TrainRegime::kProjectionsFixed);
  EXPECT_EQ(RegimeName(TrainRegime::kJoint), "joint");
  EXPECT_THROW(ParseRegime("sideways"), Error);
}

TEST(CrossValidationTest, FoldsPartitionTheItems) {
  const auto splits = KFoldSplits(23, 10, 4);
  ASSERT_EQ(splits.size(), 10u);
  std::vector<int> seen(23, 0);
  for (const auto& [train, held] : splits) {
    EXPECT_EQ(train.size() + held.size(), 23u);
    for (std::size_t i : held) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(KFoldSplits(3, 4, 0), Error);
}

TEST(CrossValidationTest, PrefersSmallAlphaOnSeparableData) {
  std::mt19937_64 rng(21);
  const PairBatch pairs = SeparablePairs(rng, 40);
  TrainConfig cfg = TrainConfig::ForRegime(TrainRegime::kWeightsOnly);
  cfg.epochs = 10;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 8;
  const double alpha =
      SelectAlphaByCrossValidation(SiameseModel::Untrained(3), pairs, {1e-3, 1e3}, 4, cfg);
  EXPECT_EQ(alpha, 1e-3);
}

TEST(AlignPairTest, CropsToBestOverlap) {
  std::mt19937_64 rng(22);
  const FeatureMap big = RandomMap(rng, 2, 12, 12);
  const FeatureMap small = ExtractPatch(big, 3, 5, 6, 6);
  const TrainingPair p = AlignPair(small, big, 1, AlignmentConfig{1, 0, 0, 4, 1.0});
  ASSERT_EQ(p.x.height(), 6);
  ASSERT_EQ(p.y.height(), 6);
  EXPECT_NEAR(Mcncc(p.x, p.y, SupportRegion::Full(p.x)), 1.0, 1e-9);
}

}  // namespace
}  // namespace crossmatch
