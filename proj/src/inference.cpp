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

#include "patchref/inference.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "patchref/anchors.hpp"
#include "patchref/box_codec.hpp"
#include "patchref/voxelizer.hpp"
#include "text_util.hpp"

namespace patchref {

ProposalsByFrame parse_proposals(std::string_view text, ProposalSource source) {
  ProposalsByFrame out;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_number = i + 1;
    const auto line = lines[i];
    if (detail::is_blank(line) || line.find_first_not_of(" \t") == line.find('#')) continue;
    const auto t = detail::split_ws(line);
    if (t.size() != 4 && t.size() != 9) {
      throw FormatError(fmt::format("proposals line {}: expected 4 or 9 fields, found {}",
                                    line_number, t.size()));
    }
    Proposal p;
    p.frame_id = std::string(t[0]);
    p.source = source;
    try {
      p.center = {detail::parse_double(t[1], line_number, "x"),
                  detail::parse_double(t[2], line_number, "y")};
      if (t.size() == 9) {
        const double z = detail::parse_double(t[3], line_number, "z");
        const double l = detail::parse_double(t[4], line_number, "l");
        const double w = detail::parse_double(t[5], line_number, "w");
        const double h = detail::parse_double(t[6], line_number, "h");
        const double yaw = detail::parse_double(t[7], line_number, "yaw");
        p.box = make_box(p.center.x(), p.center.y(), z, l, w, h, wrap_angle(yaw));
      }
      p.score = detail::parse_double(t.back(), line_number, "score");
    } catch (const DataError& e) {
      throw FormatError(fmt::format("proposals {}", e.what()));
    }
    if (p.box && !is_valid(*p.box)) {
      throw FormatError(fmt::format("proposals line {}: box dimensions must be positive", line_number));
    }
    if (p.score < 0 || p.score > 1) {
      throw FormatError(fmt::format("proposals line {}: score {} outside [0, 1]", line_number, p.score));
    }
    out[p.frame_id].push_back(std::move(p));
  }
  return out;
}

ProposalsByFrame load_proposals(const std::filesystem::path& path, ProposalSource source) {
  try {
    return parse_proposals(read_text_file(path), source);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_proposal_line(const Proposal& p) {
  if (!p.box) return fmt::format("{} {:.6f} {:.6f} {:.6f}", p.frame_id, p.center.x(), p.center.y(), p.score);
  const auto& b = *p.box;
  return fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}", p.frame_id,
                     p.center.x(), p.center.y(), b.center.z(), b.length, b.width, b.height, b.yaw,
                     p.score);
}

std::vector<Proposal> proposals_from_ground_truth(std::string_view frame_id,
                                                  std::span<const Box3d> gt_boxes) {
  std::vector<Proposal> out;
  for (const auto& g : gt_boxes) {
    out.push_back({std::string(frame_id), g.bev_center(), g, 1.0, ProposalSource::GroundTruth});
  }
  return out;
}

Eigen::Vector4d default_scene_extent() {
  const auto rpn = preset_rpn();
  return {rpn.origin.x(), rpn.origin.y(), rpn.origin.x() + rpn.extent.x(),
          rpn.origin.y() + rpn.extent.y()};
}

bool proposal_in_scene(const Proposal& p, const Eigen::Vector4d& e) {
  return std::isfinite(p.score) && p.center.allFinite() && p.center.x() >= e[0] &&
         p.center.y() >= e[1] && p.center.x() <= e[2] && p.center.y() <= e[3];
}

Scorer make_ground_truth_scorer(std::vector<Box3d> gt_boxes) {
  return [gts = std::move(gt_boxes)](const InferencePatch& patch,
                                     std::span<const Box3d> anchors) {
    const auto k = static_cast<Index>(anchors.size());
    ScorerOutput out;
    out.detection = Eigen::VectorXd::Zero(k);
    out.residuals = ResidualMatrix::Zero(k, kNumResiduals);
    out.direction = Eigen::VectorXd::Zero(k);
    if (gts.empty() || anchors.empty()) return out;

    std::size_t nearest = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double d = (patch.to_patch(gts[g]).bev_center() - patch.center).norm();
      if (d < best_dist) {
        best_dist = d;
        nearest = g;
      }
    }
    const Box3d gt = patch.to_patch(gts[nearest]);

    // Best anchor by axis-aligned IoU, falling back to the closest center.
    std::size_t best = 0;
    double best_iou = -1;
    double best_center = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double iou = axis_aligned_bev_iou(gt, anchors[a]);
      const double dc = (anchors[a].bev_center() - gt.bev_center()).norm();
      if (iou > best_iou || (iou == best_iou && iou == 0 && dc < best_center)) {
        best_iou = iou;
        best_center = dc;
        best = a;
      }
    }
    const auto target = encode_residual(gt, anchors[best]);
    const auto row = static_cast<Index>(best);
    out.detection[row] = 1.0;
    out.residuals.row(row) = target.values.transpose();
    out.direction[row] = target.direction ? 1.0 : 0.0;
    return out;
  };
}

std::vector<DetectionRecord> refine(const PointCloud& scene, std::span<const Proposal> proposals,
                                    const Scorer& scorer, const RefineConfig& config) {
  if (!scorer) throw ContractError("refine needs a scorer");
  std::vector<DetectionRecord> out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i];
    std::vector<ScoredBox> others;
    for (std::size_t j = 0; j < proposals.size(); ++j) {
      if (j != i && proposals[j].box) others.push_back({*proposals[j].box, proposals[j].score});
    }
    const InferencePatch patch = extract_inference_patch(scene.points, p.center, others, config.extraction);
    const auto anchors = generate_anchors(lrn_anchor_spec(patch.center));
    const ScorerOutput s = scorer(patch, anchors);
    const auto k = static_cast<Index>(anchors.size());
    if (s.detection.size() != k || s.residuals.rows() != k || s.direction.size() != k) {
      throw ContractError(fmt::format(
          "scorer output shape ({}, {}x{}, {}) does not match {} anchors", s.detection.size(),
          s.residuals.rows(), s.residuals.cols(), s.direction.size(), k));
    }

    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return s.detection[a] > s.detection[b]; });
    const std::size_t take = std::min<std::size_t>(config.detections_per_patch, order.size());
    for (std::size_t r = 0; r < take; ++r) {
      const Index a = order[r];
      const double score = s.detection[a];
      if (!(score >= config.score_threshold)) break;
      ResidualTargets<double> t;
      t.values = s.residuals.row(a).transpose();
      t.direction = s.direction[a] >= 0.5;
      const Box3d local = decode_residual(t, anchors[static_cast<std::size_t>(a)]);
      out.push_back({patch.to_scene(local), score, p.frame_id});
    }
  }
  return out;
}

std::vector<DetectionRecord> nms(std::span<const DetectionRecord> dets, double iou_threshold) {
  if (!(iou_threshold >= 0 && iou_threshold <= 1)) {
    throw ContractError(fmt::format("nms threshold {} outside [0, 1]", iou_threshold));
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<DetectionRecord> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const DetectionRecord& k) {
      return rotated_bev_iou(k.box, dets[i].box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

std::vector<DetectionRecord> detect(const PointCloud& scene, std::span<const Proposal> proposals,
                                    const Scorer& scorer, const RefineConfig& config) {
  const auto refined = refine(scene, proposals, scorer, config);
  return nms(refined, config.nms_threshold);
}

std::string format_predictions(std::span<const DetectionRecord> detections,
                               const CalibrationSet& calib, std::string_view class_name) {
  std::string text;
  for (const auto& d : detections) {
    LabelRecord label = sensor_box_to_camera_frame(d.box, calib);
    label.class_name = std::string(class_name);
    label.bbox2d = project_bbox2d(d.box, calib);
    text += format_label_line(label, d.score);
    text += '\n';
  }
  return text;
}

void write_predictions(const std::filesystem::path& dir, std::string_view frame_id,
                       std::span<const DetectionRecord> detections, const CalibrationSet& calib,
                       std::string_view class_name) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (std::string(frame_id) + ".txt");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_predictions(detections, calib, class_name);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DetectionRecord> read_predictions(const std::filesystem::path& dir,
                                              std::string_view frame_id,
                                              const CalibrationSet& calib,
                                              std::string_view class_name) {
  const auto path = dir / (std::string(frame_id) + ".txt");
  std::vector<DetectionRecord> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& s : parse_scored_label_file(path)) {
    if (s.record.class_name != class_name) continue;
    out.push_back({camera_box_to_sensor_frame(s.record, calib), s.score.value_or(1.0),
                   std::string(frame_id)});
  }
  return out;
}

}  // namespace patchref
