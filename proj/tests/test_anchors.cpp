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

#include <algorithm>
#include <numeric>
#include <set>

#include <doctest.h>

#include "patchref/anchors.hpp"
#include "patchref/testing/generators.hpp"

using namespace patchref;

namespace {

// Two boxes of length L offset by d along x have IoU (L - d) / (L + d).
// The lengths below make every coordinate and the IoU exact in binary.
struct Boundary {
  double length;
  double offset;
  double iou;
};

MatchResult match_with_offset(const Boundary& b) {
  const Box3d gt = make_box(0.0, 0.0, -1.0, b.length, 2.0, 1.5, 0.0);
  const std::vector<Box3d> anchors = {gt, make_box(b.offset, 0.0, -1.0, b.length, 2.0, 1.5, 0.0)};
  const std::vector<Box3d> gts = {gt};
  return match_anchors(anchors, gts);
}

MatchResult labels_only(std::size_t pos, std::size_t neg, std::size_t ignore) {
  MatchResult m;
  for (std::size_t i = 0; i < pos; ++i) m.detection.push_back(DetectionLabel::Positive);
  for (std::size_t i = 0; i < neg; ++i) m.detection.push_back(DetectionLabel::Negative);
  for (std::size_t i = 0; i < ignore; ++i) m.detection.push_back(DetectionLabel::Ignore);
  // interleave so positions are not trivially sorted by label
  Rng rng(3);
  for (std::size_t i = m.detection.size(); i > 1; --i) std::swap(m.detection[i - 1], m.detection[rng.index(i)]);
  m.positive_regression.assign(m.detection.size(), 0);
  m.matched_gt.assign(m.detection.size(), -1);
  m.max_iou.assign(m.detection.size(), 0.0);
  return m;
}

}  // namespace

TEST_CASE("anchor grid generation") {
  const auto lrn = generate_anchors(lrn_anchor_spec());
  CHECK(lrn.size() == 2048);
  CHECK(lrn_anchor_spec().stride == doctest::Approx(9.6 / 32));

  AnchorGridSpec one;
  one.rows = 1;
  one.cols = 1;
  one.stride = 0.5;
  one.origin = {2.0, 3.0};
  one.orientations = {0.0};
  const auto single = generate_anchors(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].center.x() == doctest::Approx(2.25));
  CHECK(single[0].center.y() == doctest::Approx(3.25));
  CHECK(single[0].center.z() == -1.0);
  CHECK(single[0].length == 3.9);

  // row-major, orientation-minor
  CHECK(lrn[0].yaw == 0.0);
  CHECK(lrn[1].yaw == doctest::Approx(kPi / 2));
  CHECK(lrn[0].center == lrn[1].center);
  CHECK(lrn[2].center.y() > lrn[0].center.y());

  const Eigen::Vector2d center(12.0, -3.0);
  for (const auto& a : generate_anchors(lrn_anchor_spec(center))) {
    CHECK(std::abs(a.center.x() - center.x()) < 4.8);
    CHECK(std::abs(a.center.y() - center.y()) < 4.8);
  }
}

TEST_CASE("matching thresholds at constructed boundaries") {
  SUBCASE("identical anchor") {
    const auto m = match_with_offset({4.0, 1.0, 0.6});
    CHECK(m.detection[0] == DetectionLabel::Positive);
    CHECK(m.positive_regression[0] == 1);
    CHECK(m.matched_gt[0] == 0);
    CHECK(m.max_iou[0] == 1.0);
  }
  SUBCASE("IoU exactly 0.6 is not positive") {
    const auto m = match_with_offset({4.0, 1.0, 0.6});
    CHECK(m.max_iou[1] == 0.6);
    CHECK(m.detection[1] == DetectionLabel::Ignore);
    CHECK(m.positive_regression[1] == 1);
  }
  SUBCASE("IoU just above 0.6 is positive") {
    const auto m = match_with_offset({4.0, 0.75, 3.25 / 4.75});
    CHECK(m.max_iou[1] > 0.6);
    CHECK(m.detection[1] == DetectionLabel::Positive);
    CHECK(m.positive_regression[1] == 1);
  }
  SUBCASE("IoU 0.5 is ignored for detection, positive for regression") {
    const auto m = match_with_offset({6.0, 2.0, 0.5});
    CHECK(m.max_iou[1] == 0.5);
    CHECK(m.detection[1] == DetectionLabel::Ignore);
    CHECK(m.positive_regression[1] == 1);
    CHECK(m.matched_gt[1] == 0);
  }
  SUBCASE("IoU exactly 0.45 is neither negative nor regression-positive") {
    const auto m = match_with_offset({7.25, 2.75, 0.45});
    CHECK(m.max_iou[1] == 0.45);
    CHECK(m.detection[1] == DetectionLabel::Ignore);
    CHECK(m.positive_regression[1] == 0);
    CHECK(m.matched_gt[1] == -1);
  }
  SUBCASE("IoU 0.3 is negative") {
    const auto m = match_with_offset({6.5, 3.5, 0.3});
    CHECK(m.max_iou[1] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(m.detection[1] == DetectionLabel::Negative);
    CHECK(m.positive_regression[1] == 0);
  }
}

TEST_CASE("best anchor per gt is forced positive") {
  const Box3d gt = make_box(0.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0);
  // both anchors overlap at 0.5 and 1/3; neither passes 0.6
  const std::vector<Box3d> anchors = {make_box(2.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0),
                                      make_box(4.0 / 3.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0)};
  const std::vector<Box3d> gts = {gt};
  const auto forced = match_anchors(anchors, gts);
  CHECK(forced.detection[1] == DetectionLabel::Positive);
  CHECK(forced.detection[0] == DetectionLabel::Negative);
  MatchThresholds plain;
  plain.force_best_anchor = false;
  CHECK(match_anchors(anchors, gts, plain).detection[1] == DetectionLabel::Ignore);

  // ties go to the lowest index
  const std::vector<Box3d> twins = {anchors[1], anchors[1]};
  const auto tie = match_anchors(twins, gts);
  CHECK(tie.detection[0] == DetectionLabel::Positive);
  CHECK(tie.detection[1] == DetectionLabel::Ignore);
}

TEST_CASE("matching invariants on the LRN grid") {
  const auto anchors = generate_anchors(lrn_anchor_spec());
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Box3d> gts;
    for (int g = 0; g < 3; ++g) gts.push_back(testing::random_box(rng, 4.0));
    const auto m = match_anchors(anchors, gts);
    std::vector<int> positives_per_gt(gts.size(), 0);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (m.detection[a] == DetectionLabel::Positive) {
        CHECK(m.positive_regression[a] == 1);
        REQUIRE(m.matched_gt[a] >= 0);
        ++positives_per_gt[static_cast<std::size_t>(m.matched_gt[a])];
      }
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double best = 0;
      for (const auto& a : anchors) best = std::max(best, axis_aligned_bev_iou(gts[g], a));
      if (best >= 0.6) CHECK(positives_per_gt[g] >= 1);
    }

    // permuting gts only relabels matched indices
    std::vector<Box3d> rev(gts.rbegin(), gts.rend());
    const auto r = match_anchors(anchors, rev);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      CHECK(r.max_iou[a] == m.max_iou[a]);
      if (m.matched_gt[a] >= 0 && r.matched_gt[a] >= 0) {
        const auto& g1 = gts[static_cast<std::size_t>(m.matched_gt[a])];
        const auto& g2 = rev[static_cast<std::size_t>(r.matched_gt[a])];
        CHECK(axis_aligned_bev_iou(g1, anchors[a]) == axis_aligned_bev_iou(g2, anchors[a]));
      }
    }
  }
}

TEST_CASE("balanced sampling") {
  SUBCASE("3:1 when positives suffice") {
    const auto m = labels_only(20, 100, 10);
    const auto s = sample_balanced(m, 48, 7);
    CHECK(s.positives.size() == 12);
    CHECK(s.negatives.size() == 36);
  }
  SUBCASE("deficit filled with negatives") {
    const auto m = labels_only(2, 100, 10);
    const auto s = sample_balanced(m, 48, 7);
    CHECK(s.positives.size() == 2);
    CHECK(s.negatives.size() == 46);
  }
  SUBCASE("labels, bounds, disjointness and determinism") {
    const auto m = labels_only(30, 200, 40);
    const auto s = sample_balanced(m, 64, 11);
    std::set<std::size_t> seen;
    for (auto i : s.positives) {
      CHECK(m.detection[i] == DetectionLabel::Positive);
      seen.insert(i);
    }
    for (auto i : s.negatives) {
      CHECK(m.detection[i] == DetectionLabel::Negative);
      seen.insert(i);
    }
    CHECK(seen.size() == s.total());
    CHECK(std::is_sorted(s.positives.begin(), s.positives.end()));
    const auto again = sample_balanced(m, 64, 11);
    CHECK(again.positives == s.positives);
    CHECK(again.negatives == s.negatives);
    const auto other = sample_balanced(m, 64, 12);
    CHECK((other.positives != s.positives || other.negatives != s.negatives));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(sample_balanced(labels_only(5, 0, 3), 48, 1), SamplingError);
    CHECK_THROWS_AS(sample_balanced(labels_only(5, 5, 0), 3, 1), ContractError);
  }
  SUBCASE("default sample size") { CHECK(kDefaultSampleSize == 512); }
}
