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

#include "crossmatch/whiten.h"

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_util.h"

namespace crossmatch {
namespace {

Eigen::MatrixXd Gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  }
  return m;
}

Eigen::MatrixXd Covariance(const Eigen::MatrixXd& samples) {
  const Eigen::MatrixXd c = samples.rowwise() - samples.colwise().mean();
  return c.transpose() * c / static_cast<double>(samples.rows());
}

// Rows with zero mean and population covariance exactly I (up to rounding).
Eigen::MatrixXd WhiteSamples(std::mt19937_64& rng, int rows, int cols) {
  Eigen::MatrixXd x = Gaussian(rng, rows, cols);
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(rows);
  const Eigen::MatrixXd l = cov.llt().matrixL();
  return (l.triangularView<Eigen::Lower>().solve(x.transpose())).transpose();
}

Eigen::MatrixXd Project(const Projection& p, const Eigen::MatrixXd& samples) {
  return ((samples.rowwise() - p.mean.transpose()) * p.matrix.transpose());
}

TEST(PcaTest, ExactlyWhiteDataGivesSignedPermutation) {
  // Rows +-2 e_i: zero mean and covariance exactly I.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 4);
  for (int i = 0; i < 4; ++i) {
    x(2 * i, i) = 2.0;
    x(2 * i + 1, i) = -2.0;
  }
  const Projection p = FitPca(x, 4, 0.0);
  for (int r = 0; r < 4; ++r) {
    int nonzero = 0;
    for (int c = 0; c < 4; ++c) {
      const double v = std::abs(p.matrix(r, c));
      EXPECT_TRUE(v < 1e-12 || std::abs(v - 1.0) < 1e-12);
      nonzero += v > 0.5;
    }
    EXPECT_EQ(nonzero, 1);
  }
  EXPECT_TRUE(Covariance(Project(p, x)).isIdentity(1e-6));
}

TEST(PcaTest, DiagonalCovarianceScales) {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd x = WhiteSamples(rng, 500, 2);
  x.col(0) *= 2.0;
  const Projection p = FitPca(x, 2, 0.0);
  EXPECT_TRUE(Covariance(Project(p, x)).isIdentity(1e-6));
  EXPECT_NEAR(p.matrix(0, 0), 0.5, 1e-6);
  EXPECT_NEAR(p.matrix(0, 1), 0.0, 1e-6);
  EXPECT_NEAR(p.matrix(1, 0), 0.0, 1e-6);
  EXPECT_NEAR(p.matrix(1, 1), 1.0, 1e-6);
}

TEST(PcaTest, LeadingComponentMaximisesVariance) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd mix(3, 3);
  mix << 3.0, 0.5, 0.2, 0.1, 1.0, 0.3, -0.4, 0.2, 0.5;
  const Eigen::MatrixXd x = Gaussian(rng, 2000, 3) * mix.transpose();
  const Projection p = FitPca(x, 1, 0.0);
  const Eigen::Vector3d dir = p.matrix.row(0).normalized().transpose();
  const Eigen::MatrixXd cov = Covariance(x);
  const double pca_var = dir.dot(cov * dir);

  std::normal_distribution<double> g(0.0, 1.0);
  double best = 0.0;
  Eigen::Vector3d best_dir;
  for (int i = 0; i < 20000; ++i) {
    const Eigen::Vector3d u = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
    const double v = u.dot(cov * u);
    if (v > best) {
      best = v;
      best_dir = u;
    }
  }
  EXPECT_GE(pca_var, best - 1e-9);
  EXPECT_GT(std::abs(dir.dot(best_dir)), 0.99);
  // Sign convention: the largest-magnitude entry is positive.
  Eigen::Index arg;
  p.matrix.row(0).cwiseAbs().maxCoeff(&arg);
  EXPECT_GT(p.matrix(0, arg), 0.0);
}

TEST(PcaTest, DecorrelatesTrainingData) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = Gaussian(rng, 1000, 5) * Gaussian(rng, 5, 5);
  const Projection p = FitPca(x, 5, 0.0);
  const Eigen::MatrixXd cov = Covariance(Project(p, x));
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (i != j) EXPECT_LT(std::abs(cov(i, j)), 1e-4);
    }
  }
}

TEST(PcaTest, Errors) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = Gaussian(rng, 50, 3);
  EXPECT_THROW(FitPca(x, 4, 0.0), Error);
  EXPECT_THROW(FitPca(x.topRows(3), 3, 0.0), Error);
  Eigen::MatrixXd deficient(50, 3);
  deficient << x.leftCols(2), x.col(0) + x.col(1);
  try {
    FitPca(deficient, 3, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
  EXPECT_NO_THROW(FitPca(deficient, 3, RelativeRidge(deficient, kDefaultRidgeScale)));
}

TEST(CcaTest, IdenticalDomainsCorrelatePerfectly) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = Gaussian(rng, 300, 4);
  const CcaResult r = FitCca(x, x, 4, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.correlations[k], 1.0, 1e-6);
}

TEST(CcaTest, InvertibleLinearRelation) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = Gaussian(rng, 400, 5);
  const Eigen::MatrixXd rmat = Gaussian(rng, 5, 5) + 3.0 * Eigen::MatrixXd::Identity(5, 5);
  const Eigen::MatrixXd y = x * rmat.transpose();
  const CcaResult r = FitCca(x, y, 5, 0.0);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(r.correlations[k], 1.0, 1e-6);
}

TEST(CcaTest, IndependentDomainsStayBelowNullBound) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = Gaussian(rng, 1000, 8);
  const Eigen::MatrixXd y = Gaussian(rng, 1000, 8);
  const CcaResult r = FitCca(x, y, 4, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_LT(r.correlations[k], 0.25);
}

TEST(CcaTest, ProjectedDomainsAreWhiteAndOrdered) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd z = Gaussian(rng, 800, 3);
  const Eigen::MatrixXd x = z * Gaussian(rng, 3, 5) + 0.5 * Gaussian(rng, 800, 5);
  const Eigen::MatrixXd y = z * Gaussian(rng, 3, 4) + 0.5 * Gaussian(rng, 800, 4);
  const CcaResult r = FitCca(x, y, 3, 0.0, "scene", "impression");
  EXPECT_TRUE(Covariance(Project(r.x, x)).isIdentity(1e-4));
  EXPECT_TRUE(Covariance(Project(r.y, y)).isIdentity(1e-4));
  for (int k = 1; k < 3; ++k) EXPECT_LE(r.correlations[k], r.correlations[k - 1]);
  EXPECT_EQ(r.x.domain_tag, "scene");
  EXPECT_EQ(r.y.domain_tag, "impression");
  // Projected pairs correlate at the canonical correlations, cross terms 0.
  const Eigen::MatrixXd px = Project(r.x, x), py = Project(r.y, y);
  const Eigen::MatrixXd cross = px.transpose() * py / 800.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(cross(i, j), i == j ? r.correlations[i] : 0.0, 1e-6);
    }
  }
}

TEST(CcaTest, InvariantToInvertibleReparameterisation) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd z = Gaussian(rng, 600, 2);
  const Eigen::MatrixXd x = z * Gaussian(rng, 2, 4) + Gaussian(rng, 600, 4);
  const Eigen::MatrixXd y = z * Gaussian(rng, 2, 4) + Gaussian(rng, 600, 4);
  const Eigen::MatrixXd a = Gaussian(rng, 4, 4) + 2.0 * Eigen::MatrixXd::Identity(4, 4);
  Eigen::RowVectorXd shift(4);
  shift << 1.0, -2.0, 3.0, 0.5;
  const Eigen::MatrixXd x2 = (x * a.transpose()).rowwise() + shift;
  const CcaResult r1 = FitCca(x, y, 4, 0.0);
  const CcaResult r2 = FitCca(x2, y, 4, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(r1.correlations[k], r2.correlations[k], 1e-6);
}

TEST(CcaTest, Errors) {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd x = Gaussian(rng, 5, 4);
  EXPECT_THROW(FitCca(x, x, 4, 0.0), Error);
  EXPECT_THROW(FitCca(Gaussian(rng, 50, 4), Gaussian(rng, 49, 4), 2, 0.0), Error);
  EXPECT_THROW(FitCca(Gaussian(rng, 50, 4), Gaussian(rng, 50, 2), 3, 0.0), Error);
}

TEST(ApplyProjectionTest, IdentityAndMeanShift) {
  std::mt19937_64 rng(11);
  const FeatureMap m = testing::RandomMap(rng, 3, 4, 5);
  const FeatureMap same = ApplyProjection(m, Projection::Identity(3));
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(same.values()[i], m.values()[i]);

  Projection shift = Projection::Identity(3, "shifted");
  shift.mean = Eigen::Vector3d(1.0, -2.0, 0.5);
  const FeatureMap out = ApplyProjection(m, shift);
  EXPECT_EQ(out.domain_tag(), "shifted");
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) {
        EXPECT_NEAR(out.at(c, y, x), m.at(c, y, x) - shift.mean[c], 1e-15);
      }
    }
  }
  EXPECT_THROW(ApplyProjection(m, Projection::Identity(2)), Error);
}

TEST(ApplyProjectionTest, PcaOnOwnPixelsIsWhite) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd mix = Gaussian(rng, 3, 3);
  std::vector<FeatureMap> maps;
  for (int k = 0; k < 4; ++k) {
    const Eigen::MatrixXd pix = Gaussian(rng, 100, 3) * mix.transpose();
    std::vector<double> v(300);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 100; ++i) v[c * 100 + i] = pix(i, c);
    }
    maps.emplace_back(3, 10, 10, v);
  }
  const Eigen::MatrixXd samples = PixelSamples(maps);
  ASSERT_EQ(samples.rows(), 400);
  const Projection p = FitPca(samples, 3, 0.0);
  std::vector<FeatureMap> projected;
  for (const auto& m : maps) projected.push_back(ApplyProjection(m, p));
  const Eigen::MatrixXd cov = Covariance(PixelSamples(projected));
  EXPECT_TRUE(cov.isIdentity(1e-4));
}

TEST(PixelSamplesTest, SubsetIsSeededAndSized) {
  std::mt19937_64 rng(13);
  const std::vector<FeatureMap> maps{testing::RandomMap(rng, 2, 10, 10)};
  const Eigen::MatrixXd a = PixelSamples(maps, 30, 7);
  const Eigen::MatrixXd b = PixelSamples(maps, 30, 7);
  EXPECT_EQ(a.rows(), 30);
  EXPECT_EQ(a, b);
  EXPECT_EQ(PixelSamples(maps, 0).rows(), 100);
}

TEST(PixelSamplesTest, PairedSamplesSkipInvalidPixels) {
  const FeatureMap x(1, 1, 3, {1, 2, 3}, "", {1, 0, 1});
  const FeatureMap y(1, 1, 3, {4, 5, 6});
  const std::vector<FeatureMap> xs{x}, ys{y};
  Eigen::MatrixXd sx, sy;
  PairedPixelSamples(xs, ys, &sx, &sy);
  ASSERT_EQ(sx.rows(), 2);
  EXPECT_EQ(sx(1, 0), 3.0);
  EXPECT_EQ(sy(1, 0), 6.0);
}

}  // namespace
}  // namespace crossmatch
