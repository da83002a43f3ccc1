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

#ifndef PATCHREF_ANCHORS_HPP
#define PATCHREF_ANCHORS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "patchref/geometry.hpp"

namespace patchref {

struct AnchorGridSpec {
  int rows = 32;  // along x
  int cols = 32;  // along y
  double stride = 0.3;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // grid corner, not first center
  Eigen::Vector3d anchor_dims{3.9, 1.6, 1.56};         // l, w, h
  double anchor_z = -1.0;
  std::vector<double> orientations{0.0, kPi / 2};

  std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * orientations.size();
  }
};

/// 32 x 32 grid with 0.3 m stride covering the 9.6 m patch around `center`.
AnchorGridSpec lrn_anchor_spec(const Eigen::Vector2d& center = Eigen::Vector2d::Zero());

/// Anchor k = (i * cols + j) * |orientations| + o, centered at
/// origin + ((i + 0.5) * stride, (j + 0.5) * stride).
std::vector<Box3d> generate_anchors(const AnchorGridSpec& spec);

enum class DetectionLabel : std::uint8_t { Negative = 0, Positive = 1, Ignore = 2 };

struct MatchThresholds {
  double positive_detection = 0.6;  // IoU must exceed
  double negative_detection = 0.45;  // IoU strictly below is negative
  double positive_regression = 0.45;  // IoU must exceed
  bool force_best_anchor = true;
};

struct MatchResult {
  std::vector<DetectionLabel> detection;
  std::vector<std::uint8_t> positive_regression;  // 0/1
  std::vector<int> matched_gt;  // -1 unless positive for detection or regression
  std::vector<double> max_iou;

  std::size_t size() const { return detection.size(); }
};

/// Axis-aligned BEV matching of every anchor against every gt; see
/// MatchThresholds. With force_best_anchor each gt's best anchor (ties to
/// the lowest index) becomes positive whenever it overlaps at all.
MatchResult match_anchors(std::span<const Box3d> anchors, std::span<const Box3d> gt_boxes,
                          const MatchThresholds& thresholds = {});

struct SampledAnchors {
  std::vector<std::size_t> positives;  // ascending
  std::vector<std::size_t> negatives;  // ascending

  std::size_t total() const { return positives.size() + negatives.size(); }
};

inline constexpr std::size_t kDefaultSampleSize = 512;

/// Draws n_total / 4 positives and the remainder as negatives, uniformly
/// without replacement. Missing positives are replaced by negatives.
/// Throws ContractError for n_total < 4 and SamplingError when no negative
/// anchor exists.
SampledAnchors sample_balanced(const MatchResult& match, std::size_t n_total, std::uint64_t seed);

}  // namespace patchref

#endif  // PATCHREF_ANCHORS_HPP
