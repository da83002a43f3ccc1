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

// KITTI-style average precision over easy / moderate / hard.
//
// At level D a gt of the evaluated class is a target when its difficulty is
// D or easier; harder or unclassifiable gts, and neighbouring classes (Van
// for Car, Person_sitting for Pedestrian), are ignored: a detection matched
// to them counts neither as TP nor FP.

#ifndef PATCHREF_EVALUATOR_HPP
#define PATCHREF_EVALUATOR_HPP

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "patchref/detection.hpp"
#include "patchref/kitti_io.hpp"

namespace patchref {

enum class IouMetric { Iou3d, IouBev };
enum class Interpolation { R11, R40 };

std::string_view to_string(IouMetric m);
std::string_view to_string(Interpolation i);

struct EvalConfig {
  double iou_threshold = 0.7;
  IouMetric metric = IouMetric::Iou3d;
  Interpolation interpolation = Interpolation::R11;
  std::string class_name = "Car";
};

struct GroundTruthObject {
  Box3d box;
  std::string class_name;
  Difficulty difficulty = Difficulty::Ignored;
};

struct FrameGroundTruth {
  std::string frame_id;
  std::vector<GroundTruthObject> objects;
};

struct FrameDetections {
  std::string frame_id;
  std::vector<DetectionRecord> detections;
};

/// Sensor-frame gts of a labeled frame; DontCare is dropped.
FrameGroundTruth ground_truth_from_frame(const Frame& frame);

enum class MatchOutcome : std::uint8_t { TruePositive, FalsePositive, IgnoredMatch };

struct FrameMatch {
  std::vector<MatchOutcome> detections;  // input order
  std::vector<std::uint8_t> gt_matched;
};

using IouFunction = std::function<double(const Box3d&, const Box3d&)>;

/// Detections in descending score (stable) each take the highest-IoU
/// unmatched gt at IoU >= threshold. Matching an ignored gt yields
/// IgnoredMatch.
FrameMatch match_frame(std::span<const DetectionRecord> detections,
                       std::span<const Box3d> gts, std::span<const std::uint8_t> gt_ignored,
                       const IouFunction& iou, double threshold);

struct LevelResult {
  Difficulty level = Difficulty::Easy;
  bool has_targets = false;
  double ap = 0;  // percent
  std::size_t num_gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<double> precision;  // per ranked detection
  std::vector<double> recall;
  std::vector<double> recall_samples;
  std::vector<double> interpolated_precision;  // at recall_samples
};

struct EvalResult {
  EvalConfig config;
  std::array<LevelResult, 3> levels;
};

std::vector<double> recall_sample_points(Interpolation interpolation);

/// Ranked TP/FP flags (descending score) against `num_gt` targets ->
/// interpolated AP in percent. Exposed for direct checks.
double average_precision(std::span<const std::uint8_t> ranked_tp, std::size_t num_gt,
                         Interpolation interpolation);

/// Throws ContractError unless both sides cover the same frame ids.
EvalResult evaluate(std::span<const FrameDetections> detections,
                    std::span<const FrameGroundTruth> ground_truth, const EvalConfig& config = {});

std::string format_report(const EvalResult& result);
/// key = value lines; per-level keys carry the metric, e.g. ap_3d_moderate.
/// All results are expected to share class, interpolation and threshold.
std::string format_result_file(std::span<const EvalResult> results);

}  // namespace patchref

#endif  // PATCHREF_EVALUATOR_HPP
