// Copyright 2026 The patchref Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference loss mathematics for the refinement head with analytic
// gradients. Activations are probabilities (post-sigmoid), clamped to
// [kProbabilityClamp, 1 - kProbabilityClamp] before taking logs; the
// gradient is zero where the clamp is active.
//
//   L = alpha / N_total * sum_pos Lcls(p, 1)
//     + beta  / N_total * sum_neg Lcls(p, 0)
//     + gamma / N_reg * sum_reg [ SL1(u, u*) + SL1(v, v*) + BCE(h, h*) ]

#ifndef PATCHREF_LOSS_HPP
#define PATCHREF_LOSS_HPP

#include <span>
#include <vector>

#include <Eigen/Core>

#include "patchref/anchors.hpp"
#include "patchref/box_codec.hpp"

namespace patchref {

inline constexpr double kProbabilityClamp = 1e-7;

struct ScalarLoss {
  double value = 0;
  double gradient = 0;  // d value / d p
};

ScalarLoss bce(double p, double target);

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

ScalarLoss focal(double p, double target, const FocalParams& params = {});

struct VectorLoss {
  double value = 0;
  Eigen::VectorXd gradient;  // d value / d pred
};

/// Sum of per-element Huber terms with the transition at |d| = 1.
/// Throws ContractError on length mismatch.
VectorLoss smooth_l1(const Eigen::Ref<const Eigen::VectorXd>& pred,
                     const Eigen::Ref<const Eigen::VectorXd>& target);

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> values);

enum class ClassificationLoss { Bce, Focal };

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 2.0;
  ClassificationLoss detection_loss = ClassificationLoss::Bce;
  FocalParams focal{};
};

using ResidualMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumResiduals, Eigen::RowMajor>;
using CornerMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumCornerTargets, Eigen::RowMajor>;

/// Network-boundary activations for K anchors.
struct HeadActivations {
  Eigen::VectorXd detection;  // K probabilities
  ResidualMatrix residuals;   // K x 9
  CornerMatrix corners;       // K x 8
  Eigen::VectorXd direction;  // K probabilities
};

/// Training targets for K anchors; rows outside `regression` are unused.
struct HeadTargets {
  ResidualMatrix residuals;
  CornerMatrix corners;
  Eigen::VectorXd direction;  // 0/1
  std::vector<std::size_t> regression;  // anchors with positive regression
};

/// Targets from matching: residual/corner/direction rows for every anchor
/// flagged positive for regression.
HeadTargets build_targets(std::span<const Box3d> anchors, std::span<const Box3d> gt_boxes,
                          const MatchResult& match);

struct LossBreakdown {
  double pos_cls = 0;       // (1 / N_total) sum over sampled positives
  double neg_cls = 0;       // (1 / N_total) sum over sampled negatives
  double reg_residual = 0;  // (1 / N_reg) sum
  double reg_corner = 0;
  double direction = 0;
  double total = 0;
  bool regression_empty = false;  // N_reg == 0, regression terms are zero

  HeadActivations gradient;  // d total / d activation, same shapes
};

/// Throws ContractError when activation/target shapes disagree.
LossBreakdown total_loss(const HeadActivations& activations, const HeadTargets& targets,
                         const SampledAnchors& sampled, const LossWeights& weights = {});

}  // namespace patchref

#endif  // PATCHREF_LOSS_HPP
