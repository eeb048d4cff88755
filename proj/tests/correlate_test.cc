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

#include "crossmatch/correlate.h"

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_util.h"

namespace crossmatch {
namespace {

using testing::PearsonOracle;
using testing::Plane;
using testing::RandomMap;

TEST(NccSingleTest, SelfAndAntiCorrelation) {
  std::mt19937_64 rng(1);
  const FeatureMap x = RandomMap(rng, 1, 6, 6);
  std::vector<double> neg(x.values().begin(), x.values().end());
  for (double& v : neg) v = -v;
  const FeatureMap y(1, 6, 6, neg);
  const SupportRegion r = SupportRegion::Full(x);
  EXPECT_NEAR(NccSingle(x.channel_view(0), x.channel_view(0), r), 1.0, 1e-9);
  EXPECT_NEAR(NccSingle(x.channel_view(0), y.channel_view(0), r), -1.0, 1e-9);
}

TEST(NccSingleTest, HandValue) {
  const FeatureMap x(1, 2, 2, {1, 2, 3, 4});
  const FeatureMap y(1, 2, 2, {1, 2, 2, 5});
  const double expected = 1.5 / (std::sqrt(1.25) * std::sqrt(2.25));
  EXPECT_NEAR(NccSingle(x.channel_view(0), y.channel_view(0), SupportRegion::Full(x)),
              expected, 1e-15);
  EXPECT_NEAR(expected, 0.89443, 1e-5);
}

TEST(NccSingleTest, ConstantChannelScoresZero) {
  std::mt19937_64 rng(2);
  const FeatureMap x(1, 3, 3, std::vector<double>(9, 2.0));
  const FeatureMap y = RandomMap(rng, 1, 3, 3);
  EXPECT_EQ(NccSingle(x.channel_view(0), y.channel_view(0), SupportRegion::Full(x)), 0.0);
}

TEST(NccSingleTest, Errors) {
  const FeatureMap x = FeatureMap::Zeros(1, 3, 3);
  const FeatureMap y = FeatureMap::Zeros(1, 3, 4);
  EXPECT_THROW(NccSingle(x.channel_view(0), y.channel_view(0), SupportRegion::Full(x)),
               Error);
  try {
    NccSingle(x.channel_view(0), x.channel_view(0), SupportRegion(0, 0, 1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateRegion);
  }
}

TEST(NccSingleTest, MatchesPearsonOnSubRegion) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const FeatureMap x = RandomMap(rng, 1, 8, 9);
    const FeatureMap y = RandomMap(rng, 1, 8, 9);
    const double got =
        NccSingle(x.channel_view(0), y.channel_view(0), SupportRegion(2, 1, 5, 6));
    EXPECT_NEAR(got,
                PearsonOracle(testing::Window(x, 0, 2, 1, 5, 6),
                              testing::Window(y, 0, 2, 1, 5, 6)),
                1e-12);
  }
}

TEST(McnccTest, SingleChannelEqualsNcc) {
  std::mt19937_64 rng(4);
  const FeatureMap x = RandomMap(rng, 1, 5, 5);
  const FeatureMap y = RandomMap(rng, 1, 5, 5);
  const SupportRegion r = SupportRegion::Full(x);
  EXPECT_EQ(Mcncc(x, y, r), NccSingle(x.channel_view(0), y.channel_view(0), r));
}

TEST(McnccTest, OppositeChannelsAverageToZero) {
  std::mt19937_64 rng(5);
  const auto a = testing::RandomValues(rng, 16);
  std::vector<double> xv = a, yv = a;
  xv.insert(xv.end(), a.begin(), a.end());
  for (double v : a) yv.push_back(-v);
  const FeatureMap x(2, 4, 4, xv), y(2, 4, 4, yv);
  EXPECT_NEAR(Mcncc(x, y, SupportRegion::Full(x)), 0.0, 1e-12);
}

TEST(McnccTest, PerChannelPositiveAffineInvariance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> gain(0.1, 10.0), off(-50.0, 50.0);
  const FeatureMap x = RandomMap(rng, 4, 7, 7);
  std::vector<double> yv;
  for (int c = 0; c < 4; ++c) {
    const double a = gain(rng), b = off(rng);
    for (double v : x.channel(c)) yv.push_back(a * v + b);
  }
  const FeatureMap y(4, 7, 7, yv);
  EXPECT_NEAR(Mcncc(x, y, SupportRegion::Full(x)), 1.0, 1e-6);
}

TEST(McnccTest, ChannelMismatch) {
  const FeatureMap x = FeatureMap::Zeros(2, 3, 3);
  const FeatureMap y = FeatureMap::Zeros(3, 3, 3);
  EXPECT_THROW(Mcncc(x, y, SupportRegion::Full(x)), Error);
}

TEST(McnccTest, BoundedAndSymmetric) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const FeatureMap x = RandomMap(rng, 3, 5, 6);
    const FeatureMap y = RandomMap(rng, 3, 5, 6);
    const SupportRegion r = SupportRegion::Full(x);
    const double s = Mcncc(x, y, r);
    EXPECT_LE(std::abs(s), 1.0 + 1e-9);
    EXPECT_EQ(s, Mcncc(y, x, r));
  }
}

TEST(WeightedTest, UniformOneHotAndLinear) {
  std::mt19937_64 rng(8);
  const FeatureMap x = RandomMap(rng, 4, 6, 6);
  const FeatureMap y = RandomMap(rng, 4, 6, 6);
  const SupportRegion r = SupportRegion::Full(x);
  const double m = Mcncc(x, y, r);
  EXPECT_NEAR(McnccWeighted(x, y, r, ChannelWeights::Uniform(4)), m, 1e-15);
  const auto per = ChannelNcc(x, y, r);
  for (int k = 0; k < 4; ++k) {
    ChannelWeights w{std::vector<double>(4, 0.0), 0.0};
    w.weights[k] = 1.0;
    EXPECT_EQ(McnccWeighted(x, y, r, w), per[k]);
  }
  const ChannelWeights twice{std::vector<double>(4, 0.5), 0.0};
  EXPECT_DOUBLE_EQ(McnccWeighted(x, y, r, twice), 2.0 * m);
  const ChannelWeights biased{std::vector<double>(4, 0.25), 3.0};
  EXPECT_NEAR(McnccWeighted(x, y, r, biased), m, 1e-15);
  EXPECT_THROW(McnccWeighted(x, y, r, ChannelWeights::Uniform(3)), Error);
}

// Mean-zero, mutually orthogonal signals: columns of Q from a QR
// decomposition whose first column is constant.
Eigen::MatrixXd OrthogonalSignals(std::mt19937_64& rng, int n, int count) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, count + 1);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (int j = 1; j <= count; ++j) a(i, j) = g(rng);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                            Eigen::MatrixXd::Identity(n, count + 1);
  return q.rightCols(count);
}

TEST(MultivariateTraceTest, DiagonalConstructionEqualsMcncc) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.5, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 1 + trial % 4;
    const int h = 6, w = 7;
    const Eigen::MatrixXd q = OrthogonalSignals(rng, h * w, 2 * c);
    std::vector<double> xv, yv;
    for (int k = 0; k < c; ++k) {
      const double rho = u(rng);
      const double sx = s(rng), sy = s(rng), mx = u(rng), my = u(rng);
      for (int i = 0; i < h * w; ++i) {
        xv.push_back(mx + sx * q(i, k));
        yv.push_back(my + sy * (rho * q(i, k) + std::sqrt(1 - rho * rho) * q(i, c + k)));
      }
    }
    const FeatureMap x(c, h, w, xv), y(c, h, w, yv);
    const SupportRegion r = SupportRegion::Full(x);
    EXPECT_NEAR(MultivariateTrace(x, y, r, 0.0), Mcncc(x, y, r), 1e-6);
  }
}

TEST(MultivariateTraceTest, SelfCorrelationIsOne) {
  std::mt19937_64 rng(10);
  const FeatureMap x = RandomMap(rng, 3, 8, 8);
  const SupportRegion r = SupportRegion::Full(x);
  EXPECT_NEAR(MultivariateTrace(x, x, r, 0.0), 1.0, 1e-6);
  // The default ridge shrinks the value by about 1e-6 times the condition
  // spread of the covariance.
  const double with_ridge = MultivariateTrace(x, x, r);
  EXPECT_LT(with_ridge, 1.0);
  EXPECT_GT(with_ridge, 1.0 - 1e-4);
}

TEST(MultivariateTraceTest, SingleChannelEqualsNcc) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap x = RandomMap(rng, 1, 6, 5);
    const FeatureMap y = RandomMap(rng, 1, 6, 5);
    const SupportRegion r = SupportRegion::Full(x);
    EXPECT_NEAR(MultivariateTrace(x, y, r, 0.0),
                NccSingle(x.channel_view(0), y.channel_view(0), r), 1e-9);
  }
}

TEST(MultivariateTraceTest, SingularWithoutRidgeIsNumericalError) {
  const FeatureMap x(2, 2, 2, {1, 2, 3, 4, 2, 4, 6, 8});
  try {
    MultivariateTrace(x, x, SupportRegion::Full(x), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
  EXPECT_NO_THROW(MultivariateTrace(x, x, SupportRegion::Full(x)));
}

TEST(RegionScoreTest, McnccSchemeEqualsMcncc) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap x = RandomMap(rng, 3, 6, 6);
    const FeatureMap y = RandomMap(rng, 3, 6, 6);
    const SupportRegion r(1, 1, 4, 5);
    EXPECT_NEAR(RegionScore(x, y, r, Scorer{}), Mcncc(x, y, r), 1e-9);
  }
}

}  // namespace
}  // namespace crossmatch
