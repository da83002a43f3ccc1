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
#include <cmath>
#include <fstream>
#include <string>

#include <doctest.h>

#include "patchref/anchors.hpp"
#include "patchref/inference.hpp"
#include "patchref/synthetic.hpp"
#include "patchref/testing/generators.hpp"
#include "patchref/testing/oracles.hpp"
#include "test_util.hpp"

using namespace patchref;

namespace {

std::vector<Box3d> car_boxes(const Scene& scene) {
  std::vector<Box3d> out;
  for (const auto& o : scene.objects) {
    if (o.class_name == "Car") out.push_back(o.box);
  }
  return out;
}

std::vector<DetectionRecord> clustered_detections(Rng& rng, std::size_t n) {
  std::vector<DetectionRecord> d;
  for (std::size_t i = 0; i < n; ++i) {
    Box3d b = testing::random_box(rng, 3.0);
    b.length = rng.uniform(2.0, 5.0);
    b.width = rng.uniform(1.0, 2.5);
    // coarse scores so ties appear
    d.push_back({b, std::round(rng.uniform01() * 8) / 8, "f"});
  }
  return d;
}

}  // namespace

TEST_CASE("proposal parsing") {
  const auto parsed = parse_proposals(
      "# comment\n"
      "000001 10.5 -2 0.9\n"
      "\n"
      "000001 12 3 -0.9 4 1.7 1.5 3.5 0.4\n"
      "000002 20 1 1\n");
  REQUIRE(parsed.size() == 2);
  const auto& f1 = parsed.at("000001");
  REQUIRE(f1.size() == 2);
  CHECK(f1[0].center == Eigen::Vector2d(10.5, -2.0));
  CHECK_FALSE(f1[0].box.has_value());
  CHECK(f1[0].score == 0.9);
  REQUIRE(f1[1].box.has_value());
  CHECK(f1[1].box->length == 4.0);
  CHECK(f1[1].box->yaw == doctest::Approx(3.5 - 2 * kPi));
  CHECK(f1[1].source == ProposalSource::External);
  CHECK(parse_proposals("a 1 2 0.5\n", ProposalSource::OwnRpn).at("a")[0].source == ProposalSource::OwnRpn);

  const auto throws_naming_line = [](const std::string& text, const std::string& needle) {
    try {
      parse_proposals(text);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  throws_naming_line("a 1 2 0.5\na 1 2\n", "line 2");
  throws_naming_line("a 1 2 0.5\n\na 1 x 0.5\n", "line 3");
  throws_naming_line("a 1 2 1.5\n", "line 1");
  throws_naming_line("a 1 2 0 -4 1 1 0 0.5\n", "line 1");

  // text round trip
  const auto again = parse_proposals(format_proposal_line(f1[1]) + "\n" + format_proposal_line(f1[0]));
  CHECK(again.at("000001")[0].box->center.x() == 12.0);
  CHECK(again.at("000001")[1].score == 0.9);

  CHECK_THROWS_AS(load_proposals(test::scratch_dir("props") / "missing.txt"), IoError);
}

TEST_CASE("proposals from ground truth and scene extent") {
  const std::vector<Box3d> gts = {make_box(10.0, 1.0, -1.0, 4.0, 1.7, 1.5, 0.2)};
  const auto p = proposals_from_ground_truth("007", gts);
  REQUIRE(p.size() == 1);
  CHECK(p[0].center == Eigen::Vector2d(10.0, 1.0));
  CHECK(p[0].box->yaw == gts[0].yaw);
  CHECK(p[0].score == 1.0);
  CHECK(p[0].source == ProposalSource::GroundTruth);

  const auto e = default_scene_extent();
  CHECK(e[0] == doctest::Approx(0.0));
  CHECK(e[2] == doctest::Approx(70.4));
  CHECK(e[1] == doctest::Approx(-40.0));
  CHECK(e[3] == doctest::Approx(40.0));
  CHECK(proposal_in_scene(p[0]));
  Proposal behind = p[0];
  behind.center.x() = -5.0;
  CHECK_FALSE(proposal_in_scene(behind));
  behind.center.x() = std::nan("");
  CHECK_FALSE(proposal_in_scene(behind));
}

TEST_CASE("refinement with the ground-truth scorer reproduces the labels") {
  for (std::size_t f = 0; f < 4; ++f) {
    const Scene scene = make_scene(make_synthetic_frame(f));
    const auto gts = car_boxes(scene);
    REQUIRE_FALSE(gts.empty());
    const auto proposals = proposals_from_ground_truth(scene.id, gts);
    const auto dets = detect(scene.cloud, proposals, make_ground_truth_scorer(gts));
    REQUIRE(dets.size() == gts.size());
    for (const auto& g : gts) {
      double best = 1e9;
      for (const auto& d : dets) best = std::min(best, test::max_box_error(d.box, g));
      CHECK(best < 1e-6);
    }
    for (const auto& d : dets) {
      CHECK(d.score == 1.0);
      CHECK(d.frame_id == scene.id);
    }
  }
}

TEST_CASE("refinement edge cases") {
  const Scene scene = make_scene(make_synthetic_frame(1));
  const auto gts = car_boxes(scene);
  const auto scorer = make_ground_truth_scorer(gts);

  CHECK(refine(scene.cloud, {}, scorer).empty());

  SUBCASE("a centre-only proposal 3 m off still finds the car") {
    Proposal p;
    p.frame_id = scene.id;
    p.center = gts[0].bev_center() + Eigen::Vector2d(3.0, 0.0);
    const std::vector<Proposal> one = {p};
    const auto dets = refine(scene.cloud, one, scorer);
    REQUIRE(dets.size() == 1);
    double best = 1e9;
    for (const auto& g : gts) best = std::min(best, test::max_box_error(dets[0].box, g));
    CHECK(best < 1e-6);
  }
  SUBCASE("all-zero scores fall under the threshold") {
    const Scorer silent = [](const InferencePatch&, std::span<const Box3d> anchors) {
      const auto k = static_cast<Index>(anchors.size());
      ScorerOutput s;
      s.detection = Eigen::VectorXd::Zero(k);
      s.residuals = ResidualMatrix::Zero(k, kNumResiduals);
      s.direction = Eigen::VectorXd::Zero(k);
      return s;
    };
    const auto proposals = proposals_from_ground_truth(scene.id, gts);
    CHECK(refine(scene.cloud, proposals, silent).empty());
  }
  SUBCASE("scorer output shape mismatch") {
    const Scorer wrong = [](const InferencePatch&, std::span<const Box3d>) {
      ScorerOutput s;
      s.detection = Eigen::VectorXd::Zero(3);
      s.residuals = ResidualMatrix::Zero(3, kNumResiduals);
      s.direction = Eigen::VectorXd::Zero(3);
      return s;
    };
    const auto proposals = proposals_from_ground_truth(scene.id, gts);
    CHECK_THROWS_AS(refine(scene.cloud, proposals, wrong), ContractError);
    CHECK_THROWS_AS(refine(scene.cloud, proposals, Scorer{}), ContractError);
  }
}

TEST_CASE("nms: examples") {
  const Box3d a = make_box(0.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0);
  const Box3d b = make_box(1.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0);  // IoU 0.6 with a
  const Box3d c = make_box(10.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0);
  const std::vector<DetectionRecord> d = {{b, 0.8, "f"}, {a, 0.9, "f"}, {c, 0.1, "f"}};
  const auto kept = nms(d, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].score == 0.1);
  CHECK(nms(d, 0.6).size() == 3);  // strictly greater suppresses
  CHECK(nms({}, 0.5).empty());
  CHECK_THROWS_AS(nms(d, 1.5), ContractError);

  // equal scores keep input order
  const std::vector<DetectionRecord> tie = {{b, 0.5, "f"}, {a, 0.5, "f"}};
  REQUIRE(nms(tie, 0.5).size() == 1);
  CHECK(nms(tie, 0.5)[0].box.center.x() == 1.0);
}

TEST_CASE("nms: matches exhaustive enumeration") {
  Rng rng(51);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    const auto d = clustered_detections(rng, n);
    const double t = rng.uniform(0.05, 0.7);
    const auto kept = nms(d, t);
    const auto expected = testing::brute_force_nms(d, t);
    REQUIRE(kept.size() == expected.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      CHECK(kept[i].box.center == d[expected[i]].box.center);
      CHECK(kept[i].score == d[expected[i]].score);
    }
  }
}

TEST_CASE("nms: properties") {
  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = clustered_detections(rng, 20);
    const double t = 0.3;
    const auto kept = nms(d, t);
    CHECK(kept.size() <= d.size());
    CHECK(std::is_sorted(kept.begin(), kept.end(), [](auto& x, auto& y) { return x.score > y.score; }));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(rotated_bev_iou(kept[i].box, kept[j].box) <= t);
    }
    // idempotent
    CHECK(nms(kept, t).size() == kept.size());
    // threshold 1 keeps everything
    CHECK(nms(d, 1.0).size() == d.size());
  }
}

TEST_CASE("prediction files") {
  const auto dir = test::scratch_dir("predictions");
  const Frame frame = make_synthetic_frame(2);
  const Scene scene = make_scene(frame);
  std::vector<DetectionRecord> dets;
  for (const auto& g : car_boxes(scene)) dets.push_back({g, 0.75, frame.id});
  write_predictions(dir, frame.id, dets, frame.calib);

  const auto back = read_predictions(dir, frame.id, frame.calib);
  REQUIRE(back.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(test::max_box_error(back[i].box, dets[i].box) < 1e-5);
    CHECK(back[i].score == 0.75);
  }
  CHECK(read_predictions(dir, frame.id, frame.calib, "Pedestrian").empty());
  CHECK(read_predictions(dir, "999999", frame.calib).empty());

  // lines carry the label layout plus a trailing score
  const std::string text = format_predictions(dets, frame.calib);
  const auto first = text.substr(0, text.find('\n'));
  CHECK(first.rfind("Car ", 0) == 0);
  CHECK(std::count(first.begin(), first.end(), ' ') == 15);
}
