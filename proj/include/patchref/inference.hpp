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

// Proposal -> patch -> scorer -> decoded scene box -> NMS.
//
// The scorer is the network boundary: it sees one inference patch plus the
// anchor grid laid over it and returns per-anchor activations.

#ifndef PATCHREF_INFERENCE_HPP
#define PATCHREF_INFERENCE_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "patchref/detection.hpp"
#include "patchref/kitti_io.hpp"
#include "patchref/loss.hpp"
#include "patchref/patch_pipeline.hpp"

namespace patchref {

enum class ProposalSource : std::uint8_t { OwnRpn = 0, External = 1, GroundTruth = 2 };

struct Proposal {
  std::string frame_id;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // BEV, sensor frame
  std::optional<Box3d> box;
  double score = 1.0;
  ProposalSource source = ProposalSource::External;
};

using ProposalsByFrame = std::map<std::string, std::vector<Proposal>>;

/// Lines are "frame x y score" or "frame x y z l w h yaw score"; blank
/// lines and '#' comments are skipped. Malformed lines throw FormatError
/// naming the line number.
ProposalsByFrame parse_proposals(std::string_view text,
                                 ProposalSource source = ProposalSource::External);
ProposalsByFrame load_proposals(const std::filesystem::path& path,
                                ProposalSource source = ProposalSource::External);
std::string format_proposal_line(const Proposal& proposal);

/// One full-box proposal per gt box, score 1.
std::vector<Proposal> proposals_from_ground_truth(std::string_view frame_id,
                                                  std::span<const Box3d> gt_boxes);

/// BEV rectangle of the scene (x_min, y_min, x_max, y_max); the RPN grid
/// range by default.
Eigen::Vector4d default_scene_extent();
bool proposal_in_scene(const Proposal& proposal, const Eigen::Vector4d& extent = default_scene_extent());

struct ScorerOutput {
  Eigen::VectorXd detection;  // K probabilities
  ResidualMatrix residuals;   // K x 9
  Eigen::VectorXd direction;  // K probabilities of direction bit 1
};

using Scorer = std::function<ScorerOutput(const InferencePatch&, std::span<const Box3d> anchors)>;

/// Mock oracle: encodes the gt nearest to the patch center exactly at its
/// best axis-aligned anchor (probability 1), everything else 0.
Scorer make_ground_truth_scorer(std::vector<Box3d> gt_boxes);

struct RefineConfig {
  ExtractionConfig extraction;
  double score_threshold = 0.05;
  std::size_t detections_per_patch = 1;
  double nms_threshold = 0.01;
};

/// Per proposal: patch extraction, scoring, top anchor(s) above the score
/// threshold, residual decode, and the inverse patch rotation. Throws
/// ContractError when the scorer output does not match the anchor grid.
std::vector<DetectionRecord> refine(const PointCloud& scene, std::span<const Proposal> proposals,
                                    const Scorer& scorer, const RefineConfig& config = {});

/// Greedy by descending score (stable in input order); drops any box whose
/// rotated BEV IoU with a kept box exceeds `iou_threshold`.
std::vector<DetectionRecord> nms(std::span<const DetectionRecord> detections, double iou_threshold);

/// refine() followed by one NMS over the frame.
std::vector<DetectionRecord> detect(const PointCloud& scene, std::span<const Proposal> proposals,
                                    const Scorer& scorer, const RefineConfig& config = {});

/// KITTI prediction file: label-line layout plus a trailing score.
std::string format_predictions(std::span<const DetectionRecord> detections,
                               const CalibrationSet& calib, std::string_view class_name = "Car");
void write_predictions(const std::filesystem::path& dir, std::string_view frame_id,
                       std::span<const DetectionRecord> detections, const CalibrationSet& calib,
                       std::string_view class_name = "Car");
/// Missing file means no detections. Records of other classes are skipped;
/// a missing score reads as 1.
std::vector<DetectionRecord> read_predictions(const std::filesystem::path& dir,
                                              std::string_view frame_id,
                                              const CalibrationSet& calib,
                                              std::string_view class_name = "Car");

}  // namespace patchref

#endif  // PATCHREF_INFERENCE_HPP
