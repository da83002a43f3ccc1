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

#include "patchref/anchors.hpp"

#include <algorithm>

#include "patchref/common.hpp"

namespace patchref {

AnchorGridSpec lrn_anchor_spec(const Eigen::Vector2d& center) {
  AnchorGridSpec spec;
  spec.rows = 32;
  spec.cols = 32;
  spec.stride = 9.6 / 32;
  spec.origin = center - Eigen::Vector2d(4.8, 4.8);
  return spec;
}

std::vector<Box3d> generate_anchors(const AnchorGridSpec& spec) {
  if (spec.rows <= 0 || spec.cols <= 0 || !(spec.stride > 0) || spec.orientations.empty()) {
    throw ContractError("anchor grid needs positive dims, stride and at least one orientation");
  }
  std::vector<Box3d> anchors;
  anchors.reserve(spec.size());
  for (int i = 0; i < spec.rows; ++i) {
    for (int j = 0; j < spec.cols; ++j) {
      const double x = spec.origin.x() + (i + 0.5) * spec.stride;
      const double y = spec.origin.y() + (j + 0.5) * spec.stride;
      for (double yaw : spec.orientations) {
        anchors.push_back(make_box(x, y, spec.anchor_z, spec.anchor_dims[0], spec.anchor_dims[1],
                                   spec.anchor_dims[2], yaw));
      }
    }
  }
  return anchors;
}

MatchResult match_anchors(std::span<const Box3d> anchors, std::span<const Box3d> gt_boxes,
                          const MatchThresholds& th) {
  const std::size_t n = anchors.size();
  MatchResult m;
  m.detection.assign(n, DetectionLabel::Negative);
  m.positive_regression.assign(n, 0);
  m.matched_gt.assign(n, -1);
  m.max_iou.assign(n, 0.0);
  if (gt_boxes.empty()) return m;

  // Precompute the snapped gt rectangles once.
  std::vector<Eigen::Vector4d> gt_rects;
  gt_rects.reserve(gt_boxes.size());
  for (const auto& g : gt_boxes) gt_rects.push_back(axis_aligned_extent(g));

  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best_iou(gt_boxes.size(), 0.0);
  std::vector<std::size_t> gt_best_anchor(gt_boxes.size(), 0);

  for (std::size_t a = 0; a < n; ++a) {
    const Eigen::Vector4d rect = axis_aligned_extent(anchors[a]);
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double iou = aligned_rect_iou<double>(gt_rects[g], rect);
      if (iou > m.max_iou[a]) {
        m.max_iou[a] = iou;
        best_gt[a] = static_cast<int>(g);
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = a;
      }
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    const double iou = m.max_iou[a];
    if (iou > th.positive_detection) {
      m.detection[a] = DetectionLabel::Positive;
    } else if (iou < th.negative_detection) {
      m.detection[a] = DetectionLabel::Negative;
    } else {
      m.detection[a] = DetectionLabel::Ignore;
    }
    if (iou > th.positive_regression) m.positive_regression[a] = 1;
    if (m.detection[a] == DetectionLabel::Positive || m.positive_regression[a]) {
      m.matched_gt[a] = best_gt[a];
    }
  }

  if (th.force_best_anchor) {
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      if (gt_best_iou[g] <= 0) continue;
      const std::size_t a = gt_best_anchor[g];
      m.detection[a] = DetectionLabel::Positive;
      m.positive_regression[a] = 1;
      m.matched_gt[a] = static_cast<int>(g);
    }
  }
  return m;
}

SampledAnchors sample_balanced(const MatchResult& match, std::size_t n_total, std::uint64_t seed) {
  if (n_total < 4) throw ContractError("balanced sampling needs n_total >= 4");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t a = 0; a < match.size(); ++a) {
    if (match.detection[a] == DetectionLabel::Positive) pos.push_back(a);
    if (match.detection[a] == DetectionLabel::Negative) neg.push_back(a);
  }
  if (neg.empty()) throw SamplingError("no negative anchors available for balanced sampling");

  const std::size_t n_pos = std::min(n_total / 4, pos.size());
  const std::size_t n_neg = std::min(n_total - n_pos, neg.size());

  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  SampledAnchors s;
  s.positives.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
  s.negatives.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
  std::sort(s.positives.begin(), s.positives.end());
  std::sort(s.negatives.begin(), s.negatives.end());
  return s;
}

}  // namespace patchref
