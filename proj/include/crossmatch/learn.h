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

// Siamese training of channel weights and projections with a hinge loss on
// weighted MCNCC scores.

#ifndef CROSSMATCH_LEARN_H_
#define CROSSMATCH_LEARN_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crossmatch/correlate.h"
#include "crossmatch/tensor.h"
#include "crossmatch/whiten.h"

namespace crossmatch {

// Where the bias enters the hinge.
//   kThreshold: max(0, 1 - z (MCNCC_W - b)); b is the decision threshold.
//   kAsPrinted: max(0, 1 - z MCNCC_W + b); b only widens the margin and the
//               loss decreases without bound as b -> -inf.
enum class HingeForm { kThreshold, kAsPrinted };

struct SiameseModel {
  Projection proj_x;  // U, applied to the query domain
  Projection proj_y;  // V, applied to the database domain
  ChannelWeights weights;
  double alpha = 100.0;  // L2 on W
  double beta = 1.0;     // L2 on U and V (Frobenius)
  HingeForm hinge = HingeForm::kThreshold;

  // Identity projections, uniform 1/C weights and zero bias: scores equal
  // plain MCNCC.
  static SiameseModel Untrained(int channels);

  // Throws kDimensionMismatch when U, V and W disagree.
  void Validate() const;
  int input_dim_x() const { return proj_x.input_dim(); }
  int input_dim_y() const { return proj_y.input_dim(); }
  int output_dim() const { return proj_x.output_dim(); }
};

struct TrainingPair {
  FeatureMap x;
  FeatureMap y;
  int z = 1;  // +1 same source, -1 different
};

using PairBatch = std::vector<TrainingPair>;

// dNCC/dx[j] for every pixel of the plane; zero outside the shared region.
// For a channel with stddev above epsilon this is
//   (y~[j] - x~[j] * NCC) / (|P| * stddev_x).
// The derivative with respect to y is NccGradient(y, x, ...).
std::vector<double> NccGradient(const ChannelView& x, const ChannelView& y,
                                const SupportRegion& region,
                                double epsilon = kDefaultEpsilon);

// Hinge data term summed over pairs plus alpha/2 |W|^2 + beta/2 (|U|^2 + |V|^2).
double LossForward(const PairBatch& batch, const SiameseModel& model,
                   double epsilon = kDefaultEpsilon);

struct ModelGradients {
  double loss = 0.0;
  std::vector<double> weights;
  double bias = 0.0;
  Eigen::MatrixXd proj_x;
  Eigen::MatrixXd proj_y;
  std::size_t active_pairs = 0;
};

// Exact subgradient of LossForward (zero at the hinge kink). The data term
// covers `batch`; the regularizer gradient is multiplied by reg_scale.
ModelGradients LossBackward(const PairBatch& batch, const SiameseModel& model,
                            double epsilon = kDefaultEpsilon,
                            double reg_scale = 1.0, int workers = 1);

// Parameter groups trained under each regime:
//   kWeightsOnly       W and b over fixed (identity or given) projections
//   kProjectionsFixed  W and b over CCA projections fitted beforehand
//   kJoint             W, b, U and V, usually from a CCA initialization
enum class TrainRegime { kWeightsOnly, kProjectionsFixed, kJoint };

std::string RegimeName(TrainRegime regime);
TrainRegime ParseRegime(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 16;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> w_init;  // unset keeps the model's W
  bool freeze_weights = false;
  bool freeze_bias = false;
  bool freeze_proj_x = true;
  bool freeze_proj_y = true;
  int workers = 1;
  double epsilon = kDefaultEpsilon;

  static TrainConfig ForRegime(TrainRegime regime);
  void Validate() const;
};

struct TrainResult {
  SiameseModel model;
  double best_validation_loss = 0.0;
  int best_epoch = 0;  // 0 means the initial model
  std::vector<double> validation_history;  // one entry per epoch
};

// Mini-batch gradient descent with a fixed learning rate. Each step descends
// on the batch's data term plus its share (batch/total) of the regularizer.
// Pair order is shuffled per epoch from the seed. Returns the model with the
// lowest validation loss seen (the training set is used when no validation
// set is given). Throws kNumerical with the iteration index on divergence.
TrainResult Train(const SiameseModel& initial, const PairBatch& train,
                  const PairBatch* validation, const TrainConfig& cfg);

// Seeded k-fold partition of [0, n): fold f is (train indices, held-out).
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
KFoldSplits(std::size_t n, int folds, std::uint64_t seed);

// Picks the alpha with the lowest mean held-out loss under k-fold training.
double SelectAlphaByCrossValidation(const SiameseModel& initial,
                                    const PairBatch& pairs,
                                    const std::vector<double>& alphas,
                                    int folds, const TrainConfig& cfg);

// Fraction of pairs whose predicted label sign(MCNCC_W - b) equals z.
double PairAccuracy(const PairBatch& batch, const SiameseModel& model,
                    double epsilon = kDefaultEpsilon);

// Scorer that evaluates MCNCC_W on maps already passed through U and V.
Scorer ModelScorer(const SiameseModel& model, double epsilon = kDefaultEpsilon);

// CCA projections fitted on the pixels of the pairs with z = +1.
CcaResult FitCcaOnPairs(const PairBatch& pairs, int k, double ridge);

// Crops two maps of different size to the overlap of their best MCNCC
// alignment so they can enter a training pair.
TrainingPair AlignPair(const FeatureMap& x, const FeatureMap& y, int z,
                       const AlignmentConfig& cfg,
                       double epsilon = kDefaultEpsilon);

}  // namespace crossmatch

#endif  // CROSSMATCH_LEARN_H_
